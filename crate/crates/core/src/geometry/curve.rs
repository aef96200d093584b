use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
}

/// A smooth parametrized planar curve.
///
/// Normals point outward for counterclockwise curves, i.e. they are the
/// tangent rotated by -90 degrees; clockwise curves flip that rotation.
pub trait Curve: Send + Sync + fmt::Debug {
    fn position(&self, t: f64) -> Point;
    fn derivative(&self, t: f64) -> Point;
    fn second_derivative(&self, t: f64) -> Point;

    fn domain(&self) -> (f64, f64) {
        (0.0, TAU)
    }

    fn orientation(&self) -> Orientation {
        Orientation::CounterClockwise
    }

    fn speed(&self, t: f64) -> f64 {
        self.derivative(t).norm()
    }

    fn tangent(&self, t: f64) -> Point {
        let d = self.derivative(t);
        d * (1.0 / d.norm())
    }

    fn normal(&self, t: f64) -> Point {
        let tau = self.tangent(t);
        match self.orientation() {
            Orientation::CounterClockwise => Point::new(tau.y, -tau.x),
            Orientation::Clockwise => Point::new(-tau.y, tau.x),
        }
    }

    /// Signed curvature, positive where a counterclockwise curve is convex.
    fn curvature(&self, t: f64) -> f64 {
        let d = self.derivative(t);
        let dd = self.second_derivative(t);
        let k = d.cross(dd) / d.norm().powi(3);
        match self.orientation() {
            Orientation::CounterClockwise => k,
            Orientation::Clockwise => -k,
        }
    }

    /// True when the endpoints of the domain map to the same point.
    fn is_closed(&self) -> bool {
        let (a, b) = self.domain();
        let pa = self.position(a);
        let scale = 1.0 + pa.norm();
        pa.dist(self.position(b)) <= 1e-12 * scale
    }
}

/// Base radial profile of a star-shaped curve, `r(t)` about a center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Circle { radius: f64 },
    /// `r = radius * (1 + amplitude * cos(arms * t))`.
    Star { radius: f64, amplitude: f64, arms: u32 },
    /// `r = half_side * (cos^p t + sin^p t)^(-1/p)` with even `p`.
    Superellipse { half_side: f64, exponent: u32 },
}

impl Profile {
    /// Returns `(r, r', r'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Circle { radius } => (radius, 0.0, 0.0),
            Profile::Star {
                radius,
                amplitude,
                arms,
            } => {
                let k = arms as f64;
                let (s, c) = (k * t).sin_cos();
                (
                    radius * (1.0 + amplitude * c),
                    -radius * amplitude * k * s,
                    -radius * amplitude * k * k * c,
                )
            }
            Profile::Superellipse {
                half_side,
                exponent,
            } => {
                let p = exponent as f64;
                let n = exponent as i32;
                let (s, c) = t.sin_cos();
                let g = c.powi(n) + s.powi(n);
                let g1 = p * (s.powi(n - 1) * c - c.powi(n - 1) * s);
                let g2 = p
                    * ((p - 1.0) * c.powi(n - 2) * s * s - c.powi(n) + (p - 1.0) * s.powi(n - 2) * c * c
                        - s.powi(n));
                let a = -1.0 / p;
                let r = half_side * g.powf(a);
                let r1 = half_side * a * g.powf(a - 1.0) * g1;
                let r2 = half_side * a * ((a - 1.0) * g.powf(a - 2.0) * g1 * g1 + g.powf(a - 1.0) * g2);
                (r, r1, r2)
            }
        }
    }

    /// Largest radius, used to place charges and targets.
    pub fn max_radius(&self) -> f64 {
        match *self {
            Profile::Circle { radius } => radius,
            Profile::Star {
                radius, amplitude, ..
            } => radius * (1.0 + amplitude.abs()),
            Profile::Superellipse { half_side, .. } => half_side * 2f64.sqrt(),
        }
    }

    pub fn min_radius(&self) -> f64 {
        match *self {
            Profile::Circle { radius } => radius,
            Profile::Star {
                radius, amplitude, ..
            } => radius * (1.0 - amplitude.abs()),
            Profile::Superellipse { half_side, .. } => half_side,
        }
    }
}

/// Radial displacement added to a profile on a parameter window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Displacement {
    /// `height * exp(1 - 1/(1 - s^2))`, `s` mapping `[start, end]` to `[-1, 1]`.
    Bump { start: f64, end: f64, height: f64 },
    /// Flat top of `height` on `[start + ramp, end - ramp]` with smooth ramps.
    Plateau {
        start: f64,
        end: f64,
        ramp: f64,
        height: f64,
    },
}

impl Displacement {
    pub fn window(&self) -> (f64, f64) {
        match *self {
            Displacement::Bump { start, end, .. } | Displacement::Plateau { start, end, .. } => {
                (start, end)
            }
        }
    }

    /// Returns `(h, h', h'')` at `t`; identically zero outside the window.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            Displacement::Bump { start, end, height } => {
                if t <= start || t >= end {
                    return (0.0, 0.0, 0.0);
                }
                let half = 0.5 * (end - start);
                let s = (t - 0.5 * (start + end)) / half;
                let q = 1.0 - s * s;
                if q < 2e-3 {
                    return (0.0, 0.0, 0.0);
                }
                let g = (1.0 - 1.0 / q).exp();
                let d1 = -2.0 * s / (q * q);
                let d2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
                let gs = g * d1;
                let gss = g * (d1 * d1 + d2);
                (height * g, height * gs / half, height * gss / (half * half))
            }
            Displacement::Plateau {
                start,
                end,
                ramp,
                height,
            } => {
                let (a, a1, a2) = smooth_step((t - start) / ramp);
                let (b, b1, b2) = smooth_step((end - t) / ramp);
                let (a1, a2) = (a1 / ramp, a2 / (ramp * ramp));
                let (b1, b2) = (-b1 / ramp, b2 / (ramp * ramp));
                (
                    height * a * b,
                    height * (a1 * b + a * b1),
                    height * (a2 * b + 2.0 * a1 * b1 + a * b2),
                )
            }
        }
    }
}

/// C-infinity step `S(u)`: 0 for `u <= 0`, 1 for `u >= 1`. Returns `(S, S', S'')`.
pub fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // f(u) = exp(-1/u), F = f(u), G = f(1-u).
    // Below 1e-3 every factor underflows; skipping avoids 0 * inf.
    let f = |v: f64| if v < 1e-3 { 0.0 } else { (-1.0 / v).exp() };
    let f1 = |v: f64| if v < 1e-3 { 0.0 } else { f(v) / (v * v) };
    let f2 = |v: f64| {
        if v < 1e-3 {
            0.0
        } else {
            f(v) * (1.0 / v.powi(4) - 2.0 / v.powi(3))
        }
    };
    let (fa, fa1, fa2) = (f(u), f1(u), f2(u));
    let v = 1.0 - u;
    let (gb, gb1, gb2) = (f(v), -f1(v), f2(v));
    let sum = fa + gb;
    let num = fa1 * gb - fa * gb1;
    let num1 = fa2 * gb - fa * gb2;
    let s = fa / sum;
    let s1 = num / (sum * sum);
    let s2 = (num1 * sum - 2.0 * num * (fa1 + gb1)) / (sum * sum * sum);
    (s, s1, s2)
}

/// Star-shaped curve `c + r(t) (cos t, sin t)` with optional radial displacements.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarCurve {
    pub center: Point,
    pub profile: Profile,
    pub displacements: Vec<Displacement>,
}

impl PolarCurve {
    pub fn new(profile: Profile) -> Self {
        Self {
            center: Point::default(),
            profile,
            displacements: Vec::new(),
        }
    }

    pub fn with_displacement(mut self, d: Displacement) -> Self {
        self.displacements.push(d);
        self
    }

    fn radius(&self, t: f64) -> (f64, f64, f64) {
        let t = t.rem_euclid(TAU);
        let (mut r, mut r1, mut r2) = self.profile.eval(t);
        for d in &self.displacements {
            // Windows may be given on either side of the 2pi seam.
            for shift in [0.0, TAU, -TAU] {
                let (h, h1, h2) = d.eval(t + shift);
                r += h;
                r1 += h1;
                r2 += h2;
            }
        }
        (r, r1, r2)
    }

    /// Radius of a disc about `center` containing the curve.
    pub fn bounding_radius(&self) -> f64 {
        let extra: f64 = self
            .displacements
            .iter()
            .map(|d| match *d {
                Displacement::Bump { height, .. } | Displacement::Plateau { height, .. } => {
                    height.max(0.0)
                }
            })
            .sum();
        self.profile.max_radius() + extra
    }
}

impl Curve for PolarCurve {
    fn position(&self, t: f64) -> Point {
        let (r, _, _) = self.radius(t);
        let (s, c) = t.sin_cos();
        self.center + Point::new(r * c, r * s)
    }

    fn derivative(&self, t: f64) -> Point {
        let (r, r1, _) = self.radius(t);
        let (s, c) = t.sin_cos();
        Point::new(r1 * c - r * s, r1 * s + r * c)
    }

    fn second_derivative(&self, t: f64) -> Point {
        let (r, r1, r2) = self.radius(t);
        let (s, c) = t.sin_cos();
        Point::new(r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s)
    }
}

/// Wraps an angle to `[0, 2pi)`.
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}
