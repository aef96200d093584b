//! Laplace kernels, Nyström matrix entries and potential evaluation.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Discretization, Point};

const INV_2PI: f64 = 0.5 / PI;

/// Targets closer than this many local node spacings are flagged as near-boundary.
pub const NEAR_FIELD_SPACINGS: f64 = 5.0;

/// `G(x, y) = -log|x - y| / 2pi`.
pub fn fundamental_solution(x: Point, y: Point) -> Result<f64> {
    let r2 = (x - y).norm_sq();
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints { target: 0, src: 0 });
    }
    Ok(-0.25 / PI * r2.ln())
}

/// `D(x, y) = <x - y, ν_y> / (2pi |x - y|^2)`, the normal derivative of `G` at the source.
pub fn double_layer(x: Point, y: Point, nu_y: Point) -> Result<f64> {
    let d = x - y;
    let r2 = d.norm_sq();
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints { target: 0, src: 0 });
    }
    Ok(INV_2PI * d.dot(nu_y) / r2)
}

#[inline]
fn dlp(x: Point, y: Point, nu: Point) -> f64 {
    let d = x - y;
    INV_2PI * d.dot(nu) / d.norm_sq()
}

#[inline]
fn slp(x: Point, y: Point) -> f64 {
    -0.25 / PI * (x - y).norm_sq().ln()
}

/// Smooth limit of `w D(x, y)` as `y -> x` along the curve: `-w κ / 4pi`.
pub fn diagonal_limit(kappa: f64, w: f64) -> f64 {
    -w * kappa / (4.0 * PI)
}

/// Anything that can produce entries of a dense kernel matrix on demand.
pub trait KernelBlock: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;

    fn block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        Mat::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }

    fn dense(&self) -> Mat<f64> {
        Mat::from_fn(self.nrows(), self.ncols(), |i, j| self.entry(i, j))
    }
}

/// Second-kind Nyström matrix `A = -I/2 + D` of one closed curve.
#[derive(Clone, Copy)]
pub struct Nystrom<'a> {
    pub disc: &'a Discretization,
}

impl<'a> Nystrom<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        Self { disc }
    }
}

impl KernelBlock for Nystrom<'_> {
    fn nrows(&self) -> usize {
        self.disc.len()
    }

    fn ncols(&self) -> usize {
        self.disc.len()
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        let d = self.disc;
        if i == j {
            -0.5 + diagonal_limit(d.curvature[i], d.weights[i])
        } else {
            d.weights[j] * dlp(d.nodes[i], d.nodes[j], d.normals[j])
        }
    }
}

/// Double-layer interaction `w_j D(x_i, y_j)` between distinct point sets.
///
/// Construction checks that no target coincides with a source.
#[derive(Clone, Copy)]
pub struct Cross<'a> {
    pub targets: &'a Discretization,
    pub sources: &'a Discretization,
}

impl<'a> Cross<'a> {
    pub fn new(targets: &'a Discretization, sources: &'a Discretization) -> Result<Self> {
        check_separated(targets, sources)?;
        Ok(Self { targets, sources })
    }
}

impl KernelBlock for Cross<'_> {
    fn nrows(&self) -> usize {
        self.targets.len()
    }

    fn ncols(&self) -> usize {
        self.sources.len()
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        let s = self.sources;
        s.weights[j] * dlp(self.targets.nodes[i], s.nodes[j], s.normals[j])
    }
}

fn check_separated(targets: &Discretization, sources: &Discretization) -> Result<()> {
    for (i, x) in targets.nodes.iter().enumerate() {
        if let Some(j) = sources.nodes.iter().position(|y| x == y) {
            return Err(Error::CoincidentPoints { target: i, src: j });
        }
    }
    Ok(())
}

/// Dense Nyström block with targets `trg` and sources `src`. With `same_curve`
/// both must be the same discretization and the jump and diagonal limit are
/// included; otherwise coincident points are an error.
pub fn assemble_dense(src: &Discretization, trg: &Discretization, same_curve: bool) -> Result<Mat<f64>> {
    if same_curve {
        if src != trg {
            return Err(Error::DimensionMismatch(
                "same_curve assembly needs identical source and target sets".into(),
            ));
        }
        Ok(Nystrom::new(src).dense())
    } else {
        Ok(Cross::new(trg, src)?.dense())
    }
}

/// Single-layer proxy columns `scale * G(x_i, z_p)`.
pub fn single_layer_block(targets: &[Point], sources: &[Point], scale: f64) -> Mat<f64> {
    Mat::from_fn(targets.len(), sources.len(), |i, j| {
        scale * slp(targets[i], sources[j])
    })
}

/// Point charges generating a reference harmonic function.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeSet {
    pub locations: Vec<Point>,
    pub strengths: Vec<f64>,
}

impl ChargeSet {
    /// `count` charges on the circle of `radius` about `center`, with
    /// strengths uniform in `[-1, 1]` and a random phase, drawn from `seed`.
    pub fn on_circle(center: Point, radius: f64, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let locations = (0..count)
            .map(|k| {
                let t = phase + 2.0 * PI * k as f64 / count as f64;
                center + Point::new(t.cos(), t.sin()) * radius
            })
            .collect();
        let strengths = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { locations, strengths }
    }

    /// Fails if a charge lies inside the closed curve sampled by `disc`.
    pub fn check_exterior(&self, disc: &Discretization) -> Result<()> {
        for (q, &c) in self.locations.iter().enumerate() {
            if winding_number(disc, c).abs() > 0.5 {
                return Err(Error::InvalidArgument(format!("charge {q} lies inside the curve")));
            }
        }
        Ok(())
    }
}

/// `u(x) = sum_q s_q G(x, c_q)`, harmonic inside any curve avoiding the charges.
pub fn exact_solution(charges: &ChargeSet, targets: &[Point]) -> Vec<f64> {
    targets
        .iter()
        .map(|&x| {
            charges
                .locations
                .iter()
                .zip(&charges.strengths)
                .map(|(&c, s)| s * slp(x, c))
                .sum()
        })
        .collect()
}

/// Points on the circle of `radius` about `center`.
pub fn circle_points(center: Point, radius: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
            center + Point::new(t.cos(), t.sin()) * radius
        })
        .collect()
}

/// Discrete winding number `-sum_j w_j D(x, y_j)`: 1 inside, 0 outside.
pub fn winding_number(disc: &Discretization, x: Point) -> f64 {
    -(0..disc.len())
        .map(|j| disc.weights[j] * dlp(x, disc.nodes[j], disc.normals[j]))
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialResult {
    pub values: Vec<f64>,
    /// True where the target is within [`NEAR_FIELD_SPACINGS`] local spacings of a node,
    /// so the smooth rule is not trusted there.
    pub near_boundary: Vec<bool>,
}

/// Double-layer potential `u(x) = sum_j w_j D(x, y_j) σ_j` at off-curve targets.
pub fn eval_potential(src: &Discretization, sigma: &[f64], targets: &[Point]) -> Result<PotentialResult> {
    if sigma.len() != src.len() {
        return Err(Error::DimensionMismatch(format!(
            "density has {} entries for {} nodes",
            sigma.len(),
            src.len()
        )));
    }
    let mut values = Vec::with_capacity(targets.len());
    let mut near_boundary = Vec::with_capacity(targets.len());
    for (i, &x) in targets.iter().enumerate() {
        let mut u = 0.0;
        let mut near = false;
        for j in 0..src.len() {
            let y = src.nodes[j];
            let r = x.dist(y);
            if r == 0.0 {
                return Err(Error::CoincidentPoints { target: i, src: j });
            }
            near |= r < NEAR_FIELD_SPACINGS * src.weights[j];
            u += src.weights[j] * dlp(x, y, src.normals[j]) * sigma[j];
        }
        values.push(u);
        near_boundary.push(near);
    }
    Ok(PotentialResult { values, near_boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize_trapezoid, shapes};

    #[test]
    fn diagonal_limit_matches_circle_kernel() {
        // On a circle of radius R, D(x, y) = -1/(4 pi R) for every pair.
        let r = 1.7;
        let c = shapes::circle(r).unwrap();
        let d = discretize_trapezoid(&c, 64).unwrap();
        let off = double_layer(d.nodes[3], d.nodes[11], d.normals[11]).unwrap();
        assert!((off + 1.0 / (4.0 * PI * r)).abs() < 1e-14);
        let lim = diagonal_limit(d.curvature[3], d.weights[3]) / d.weights[3];
        assert!((lim - off).abs() < 1e-14);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = Point::new(0.3, 0.2);
        assert!(fundamental_solution(p, p).is_err());
        assert!(double_layer(p, p, Point::new(1.0, 0.0)).is_err());
        let c = shapes::circle(1.0).unwrap();
        let d = discretize_trapezoid(&c, 32).unwrap();
        assert!(assemble_dense(&d, &d, false).is_err());
    }

    #[test]
    fn winding_number_inside_and_outside() {
        let c = shapes::star(5, 0.3).unwrap();
        let d = discretize_trapezoid(&c, 400).unwrap();
        assert!((winding_number(&d, Point::new(0.1, 0.2)) - 1.0).abs() < 1e-10);
        assert!(winding_number(&d, Point::new(3.0, 0.0)).abs() < 1e-10);
    }

    #[test]
    fn near_boundary_flag() {
        let c = shapes::circle(1.0).unwrap();
        let d = discretize_trapezoid(&c, 100).unwrap();
        let sigma = vec![1.0; d.len()];
        let r = eval_potential(&d, &sigma, &[Point::new(0.0, 0.0), Point::new(0.999, 0.0)]).unwrap();
        assert_eq!(r.near_boundary, vec![false, true]);
        assert!((r.values[0] + 1.0).abs() < 1e-13);
    }
}
