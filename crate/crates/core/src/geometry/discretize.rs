use std::f64::consts::PI;
use std::io::{BufRead, Write};

use super::curve::{Curve, Point};
use crate::error::{Error, Result};

/// Fewest nodes accepted by the trapezoidal rule.
pub const MIN_TRAPEZOID_NODES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Trapezoidal,
    /// Composite Gauss-Legendre of `order` points on each panel between `breakpoints`.
    Panels { order: usize, breakpoints: Vec<f64> },
    /// Union of pieces discretized by different rules.
    Mixed,
}

/// Nyström nodes of a curve. All vectors have one entry per node, in curve order.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub nodes: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Curve parameter of each node.
    pub params: Vec<f64>,
    pub scheme: Scheme,
}

impl Discretization {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
            curvature: Vec::new(),
            params: Vec::new(),
            scheme: Scheme::Mixed,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Diameter of the node cloud.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for p in &self.nodes {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if self.nodes.is_empty() {
            0.0
        } else {
            hi.dist(lo)
        }
    }

    pub fn centroid(&self) -> Point {
        let n = self.nodes.len().max(1) as f64;
        let s = self.nodes.iter().fold(Point::default(), |a, &p| a + p);
        s * (1.0 / n)
    }

    /// Copies the listed nodes, in the order given.
    pub fn subset(&self, idx: &[usize]) -> Discretization {
        Discretization {
            nodes: idx.iter().map(|&i| self.nodes[i]).collect(),
            normals: idx.iter().map(|&i| self.normals[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            curvature: idx.iter().map(|&i| self.curvature[i]).collect(),
            params: idx.iter().map(|&i| self.params[i]).collect(),
            scheme: Scheme::Mixed,
        }
    }

    /// Appends `other` after the nodes of `self`.
    pub fn concat(&self, other: &Discretization) -> Discretization {
        let mut out = self.clone();
        out.nodes.extend_from_slice(&other.nodes);
        out.normals.extend_from_slice(&other.normals);
        out.weights.extend_from_slice(&other.weights);
        out.curvature.extend_from_slice(&other.curvature);
        out.params.extend_from_slice(&other.params);
        out.scheme = Scheme::Mixed;
        out
    }

    fn push(&mut self, curve: &dyn Curve, t: f64, w: f64) {
        self.nodes.push(curve.position(t));
        self.normals.push(curve.normal(t));
        self.weights.push(w * curve.speed(t));
        self.curvature.push(curve.curvature(t));
        self.params.push(t);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,nx,ny,w,kappa")?;
        for i in 0..self.len() {
            let (p, n) = (self.nodes[i], self.normals[i]);
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                p.x, p.y, n.x, n.y, self.weights[i], self.curvature[i]
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Discretization::write_csv`]. Parameters are
    /// not stored, so they are replaced by node indices.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Discretization> {
        let mut d = Discretization::empty();
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "x,y,nx,ny,w,kappa" {
            return Err(Error::Format(format!("unexpected header {header:?}")));
        }
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Format(format!("line {}: {e}", no + 2)))?;
            if vals.len() != 6 {
                return Err(Error::Format(format!("line {}: expected 6 fields", no + 2)));
            }
            d.params.push(d.nodes.len() as f64);
            d.nodes.push(Point::new(vals[0], vals[1]));
            d.normals.push(Point::new(vals[2], vals[3]));
            d.weights.push(vals[4]);
            d.curvature.push(vals[5]);
        }
        Ok(d)
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let n = q as f64;
    for i in 0..q.div_ceil(2) {
        // Newton on P_q from the Tricomi initial guess.
        let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Periodic trapezoidal rule with `n` equispaced parameter nodes.
pub fn discretize_trapezoid(curve: &dyn Curve, n: usize) -> Result<Discretization> {
    if n < MIN_TRAPEZOID_NODES {
        return Err(Error::InvalidDiscretization(format!(
            "{n} nodes is below the minimum of {MIN_TRAPEZOID_NODES}"
        )));
    }
    if !curve.is_closed() {
        return Err(Error::InvalidCurve("trapezoidal rule needs a closed curve".into()));
    }
    let (a, b) = curve.domain();
    let h = (b - a) / n as f64;
    let params: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    nodes_at(curve, &params, h, Scheme::Trapezoidal)
}

/// Nodes at given parameters, all with the same parameter weight `h`.
pub fn nodes_at(curve: &dyn Curve, params: &[f64], h: f64, scheme: Scheme) -> Result<Discretization> {
    let mut d = Discretization::empty();
    d.scheme = scheme;
    for &t in params {
        if curve.speed(t) <= 0.0 || !curve.speed(t).is_finite() {
            return Err(Error::InvalidCurve(format!("degenerate speed at t = {t}")));
        }
        d.push(curve, t, h);
    }
    Ok(d)
}

/// Composite Gauss-Legendre rule of `order` points per panel.
pub fn discretize_panels(curve: &dyn Curve, breakpoints: &[f64], order: usize) -> Result<Discretization> {
    if order < 2 {
        return Err(Error::InvalidDiscretization("panel order must be at least 2".into()));
    }
    if breakpoints.len() < 2 {
        return Err(Error::InvalidDiscretization("need at least one panel".into()));
    }
    if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDiscretization("breakpoints must increase".into()));
    }
    let (gx, gw) = gauss_legendre(order);
    let mut d = Discretization::empty();
    d.scheme = Scheme::Panels {
        order,
        breakpoints: breakpoints.to_vec(),
    };
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for j in 0..order {
            let t = a + half * (gx[j] + 1.0);
            let s = curve.speed(t);
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::InvalidCurve(format!("degenerate speed at t = {t}")));
            }
            d.push(curve, t, half * gw[j]);
        }
    }
    Ok(d)
}

pub fn uniform_breakpoints(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels)
        .map(|i| {
            if i == panels {
                b
            } else {
                a + (b - a) * i as f64 / panels as f64
            }
        })
        .collect()
}

/// Splits panels until each one is shorter than `max_length` in arclength,
/// resolves the curve to `tol` (relative size of the two highest Legendre
/// coefficients of position and velocity), is at most twice as long as its
/// neighbours, and is at most twice as long as its distance to any
/// non-adjacent panel.
pub fn refine_panels(
    curve: &dyn Curve,
    breakpoints: &[f64],
    order: usize,
    max_length: f64,
    tol: f64,
) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(order);
    let mut bp = breakpoints.to_vec();
    loop {
        let m = bp.len() - 1;
        let pts: Vec<Vec<Point>> = (0..m)
            .map(|p| {
                let half = 0.5 * (bp[p + 1] - bp[p]);
                gx.iter().map(|x| curve.position(bp[p] + half * (x + 1.0))).collect()
            })
            .collect();
        let len: Vec<f64> = (0..m)
            .map(|p| {
                let half = 0.5 * (bp[p + 1] - bp[p]);
                gx.iter()
                    .zip(&gw)
                    .map(|(x, w)| half * w * curve.speed(bp[p] + half * (x + 1.0)))
                    .sum()
            })
            .collect();
        let mut split = vec![false; m];
        for p in 0..m {
            if bp[p + 1] - bp[p] < 1e-12 {
                continue;
            }
            if !panel_resolved(curve, bp[p], bp[p + 1], &gx, &gw, max_length, tol) {
                split[p] = true;
                continue;
            }
            let neighbours = [p.checked_sub(1), (p + 1 < m).then_some(p + 1)];
            if neighbours.iter().flatten().any(|&o| len[p] > 2.0 * len[o]) {
                split[p] = true;
                continue;
            }
            let near = (0..m)
                .filter(|&o| o + 1 < p || o > p + 1)
                .flat_map(|o| pts[o].iter())
                .flat_map(|a| pts[p].iter().map(move |b| a.dist(*b)))
                .fold(f64::INFINITY, f64::min);
            if len[p] > 2.0 * near {
                split[p] = true;
            }
        }
        if !split.iter().any(|&s| s) {
            return bp;
        }
        let mut next = vec![bp[0]];
        for p in 0..m {
            if split[p] {
                next.push(0.5 * (bp[p] + bp[p + 1]));
            }
            next.push(bp[p + 1]);
        }
        bp = next;
    }
}

fn panel_resolved(
    curve: &dyn Curve,
    a: f64,
    b: f64,
    gx: &[f64],
    gw: &[f64],
    max_length: f64,
    tol: f64,
) -> bool {
    let q = gx.len();
    let half = 0.5 * (b - a);
    let ts: Vec<f64> = gx.iter().map(|x| a + half * (x + 1.0)).collect();
    let length: f64 = ts.iter().zip(gw).map(|(&t, w)| half * w * curve.speed(t)).sum();
    if length > max_length {
        return false;
    }
    let pos: Vec<Point> = ts.iter().map(|&t| curve.position(t)).collect();
    let vel: Vec<Point> = ts.iter().map(|&t| curve.derivative(t) * half).collect();
    let scale = length.max(1e-300);
    for comp in 0..4 {
        let f: Vec<f64> = (0..q)
            .map(|j| match comp {
                0 => pos[j].x,
                1 => pos[j].y,
                2 => vel[j].x,
                _ => vel[j].y,
            })
            .collect();
        let coeffs = legendre_coefficients(&f, gx, gw);
        let tail = coeffs[q - 1].abs().max(coeffs[q - 2].abs());
        // Rounding in the samples themselves bounds how small the tail can get.
        let noise = 64.0 * f64::EPSILON * f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if tail > tol * scale + noise {
            return false;
        }
    }
    true
}

/// Legendre expansion coefficients of samples at Gauss nodes.
pub fn legendre_coefficients(f: &[f64], gx: &[f64], gw: &[f64]) -> Vec<f64> {
    let q = gx.len();
    (0..q)
        .map(|n| {
            let s: f64 = (0..q)
                .map(|j| gw[j] * f[j] * legendre_with_derivative(n, gx[j]).0)
                .sum();
            s * (2.0 * n as f64 + 1.0) / 2.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curve::{PolarCurve, Profile};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for q in [2usize, 5, 16, 20] {
            let (x, w) = gauss_legendre(q);
            for deg in 0..(2 * q) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((approx - exact).abs() < 1e-14, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn circle_perimeter_and_curvature() {
        let c = PolarCurve::new(Profile::Circle { radius: 1.5 });
        let d = discretize_trapezoid(&c, 64).unwrap();
        assert!((d.perimeter() - 3.0 * PI).abs() < 1e-13);
        assert!(d.curvature.iter().all(|k| (k - 1.0 / 1.5).abs() < 1e-13));
        let p = discretize_panels(&c, &uniform_breakpoints(0.0, 2.0 * PI, 4), 16).unwrap();
        assert!((p.perimeter() - 3.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn too_few_trapezoid_nodes_rejected() {
        let c = PolarCurve::new(Profile::Circle { radius: 1.0 });
        assert!(discretize_trapezoid(&c, 8).is_err());
    }

    #[test]
    fn refinement_respects_length_cap() {
        let c = PolarCurve::new(Profile::Circle { radius: 1.0 });
        let bp = refine_panels(&c, &[0.0, 1.0], 16, 0.1, 1e-12);
        assert!(bp.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-12));
        assert_eq!(bp.len() - 1, 16);
    }

    #[test]
    fn csv_roundtrip() {
        let c = PolarCurve::new(Profile::Circle { radius: 1.0 });
        let d = discretize_trapezoid(&c, 20).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Discretization::read_csv(&buf[..]).unwrap();
        assert_eq!(back.nodes, d.nodes);
        assert_eq!(back.weights, d.weights);
    }
}
