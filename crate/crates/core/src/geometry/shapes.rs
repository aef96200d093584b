//! Test geometries and the perturbation families used by the experiments.

use std::f64::consts::{PI, TAU};

use super::curve::{Curve, Displacement, PolarCurve, Profile};
use super::discretize::{discretize_panels, discretize_trapezoid, uniform_breakpoints, Discretization};
use super::perturb::{make_perturbation, PerturbedGeometry, Resolution};
use crate::error::{Error, Result};

/// Gauss points per panel in every panel-based family.
pub const PANEL_ORDER: usize = 16;

pub fn circle(radius: f64) -> Result<PolarCurve> {
    if !(radius > 0.0) {
        return Err(Error::InvalidCurve(format!("circle radius {radius} must be positive")));
    }
    Ok(PolarCurve::new(Profile::Circle { radius }))
}

/// `r(t) = 1 + amplitude * cos(arms * t)`.
pub fn star(arms: u32, amplitude: f64) -> Result<PolarCurve> {
    if arms == 0 || !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidCurve(format!(
            "star needs arms >= 1 and amplitude in [0, 1), got {arms}, {amplitude}"
        )));
    }
    Ok(PolarCurve::new(Profile::Star {
        radius: 1.0,
        amplitude,
        arms,
    }))
}

/// Superellipse with half side 1; larger even exponents give sharper corners.
pub fn rounded_square(exponent: u32) -> Result<PolarCurve> {
    if exponent < 2 || exponent % 2 == 1 {
        return Err(Error::InvalidCurve(format!("exponent {exponent} must be even and >= 2")));
    }
    Ok(PolarCurve::new(Profile::Superellipse {
        half_side: 1.0,
        exponent,
    }))
}

/// How the perturbation scales with `N_o`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// The cut keeps a fixed node count, so it shrinks geometrically.
    Shrinking,
    /// The cut keeps a fixed parameter window, so `N_c` grows with `N_o`.
    Fixed,
}

/// A perturbed geometry together with the curves it came from.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub original_curve: PolarCurve,
    pub perturbed_curve: PolarCurve,
    pub window: (f64, f64),
    pub geometry: PerturbedGeometry,
}

impl Scenario {
    /// Radius about the origin of a disc holding both curves.
    pub fn bounding_radius(&self) -> f64 {
        self.original_curve
            .bounding_radius()
            .max(self.perturbed_curve.bounding_radius())
    }

    /// Radius of a disc about the origin inside both curves.
    pub fn inner_radius(&self) -> f64 {
        let r = |c: &PolarCurve| c.profile.min_radius();
        r(&self.original_curve).min(r(&self.perturbed_curve))
    }
}

fn panel_count(n_o: usize) -> Result<usize> {
    if n_o % PANEL_ORDER != 0 || n_o < 4 * PANEL_ORDER {
        return Err(Error::InvalidDiscretization(format!(
            "N_o = {n_o} must be a multiple of {PANEL_ORDER} with at least 4 panels"
        )));
    }
    Ok(n_o / PANEL_ORDER)
}

fn closed_panels(curve: &PolarCurve, panels: usize) -> Result<Discretization> {
    discretize_panels(curve, &uniform_breakpoints(0.0, TAU, panels), PANEL_ORDER)
}

/// Breakpoints of `m` panels on `[a, b]`, interior ones pushed off the uniform grid.
///
/// A replacement piece that meets the old curve tangentially would otherwise put its
/// Gauss nodes on top of the cut nodes near the window ends.
fn staggered_breakpoints(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            let u = j as f64 / m as f64;
            let shift = 0.3 * (PI * u).sin() / m as f64;
            if j == m {
                b
            } else {
                a + (b - a) * (u + shift)
            }
        })
        .collect()
}

/// Window of `m` panels out of `panels`, starting at panel `start`.
fn panel_window(panels: usize, start: usize, m: usize) -> (f64, f64) {
    let h = TAU / panels as f64;
    (start as f64 * h, (start + m) as f64 * h)
}

/// Unit circle with nothing cut or added, for smoke runs of the update path.
pub fn circle_identity(n_o: usize) -> Result<Scenario> {
    let curve = circle(1.0)?;
    let original = closed_panels(&curve, panel_count(n_o)?)?;
    Ok(Scenario {
        name: "identity".into(),
        original_curve: curve.clone(),
        perturbed_curve: curve,
        window: (0.0, 0.0),
        geometry: PerturbedGeometry::identity(original),
    })
}

/// Bump height over the window angle.
pub const BUMP_HEIGHT: f64 = 0.2;

/// Panels needed to resolve one bump, whatever its width.
const BUMP_MIN_PANELS: usize = 14;

/// Unit circle with a smooth outward bump replacing an arc.
///
/// Shrinking: the cut is 12 panels (`N_c = 192`, `N_p = 224`). Fixed: the cut is
/// `3 N_o / 1000` panels, a twentieth of the circle. The bump gets 7 panels for
/// every 6 it replaces, and never fewer than 14. Its height is a fifth of the window angle.
pub fn circle_with_bump(n_o: usize, family: Family) -> Result<Scenario> {
    let panels = panel_count(n_o)?;
    let m = match family {
        Family::Shrinking => 12,
        Family::Fixed => ((3 * n_o) as f64 / 1000.0).round().max(1.0) as usize,
    };
    if m >= panels / 2 {
        return Err(Error::InvalidPerturbation(format!("{m} cut panels out of {panels}")));
    }
    let start = panels / 4 - m / 2;
    let (ta, tb) = panel_window(panels, start, m);
    let base = circle(1.0)?;
    let bumped = base.clone().with_displacement(Displacement::Bump {
        start: ta,
        end: tb,
        height: BUMP_HEIGHT * (tb - ta),
    });
    let original = closed_panels(&base, panels)?;
    let res = Resolution::Panels {
        order: PANEL_ORDER,
        breakpoints: staggered_breakpoints(ta, tb, (7 * m).div_ceil(6).max(BUMP_MIN_PANELS)),
    };
    let geometry = make_perturbation(&base, &original, (ta, tb), &bumped, &res)?;
    Ok(Scenario {
        name: match family {
            Family::Shrinking => "bump-shrinking".into(),
            Family::Fixed => "bump-fixed".into(),
        },
        original_curve: base,
        perturbed_curve: bumped,
        window: (ta, tb),
        geometry,
    })
}

/// Circle with a bump of central angle `theta` on a trapezoidal grid; the bump
/// reuses the parameters of the cut nodes so `N_p = N_c`.
///
/// The bump vanishes smoothly at the window ends, so its end nodes sit within
/// rounding of the cut nodes and the low-rank update refuses this geometry.
/// It serves node counting and dense perturbed solves.
pub fn circle_with_bump_trapezoid(n_o: usize, theta: f64) -> Result<Scenario> {
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(Error::InvalidPerturbation(format!("theta = {theta} outside (0, pi/2)")));
    }
    let base = circle(1.0)?;
    let (ta, tb) = (PI / 2.0 - theta / 2.0, PI / 2.0 + theta / 2.0);
    let bumped = base.clone().with_displacement(Displacement::Bump {
        start: ta,
        end: tb,
        height: 0.25 * theta,
    });
    let original = discretize_trapezoid(&base, n_o)?;
    let geometry = make_perturbation(&base, &original, (ta, tb), &bumped, &Resolution::SameNodes)?;
    Ok(Scenario {
        name: "bump-trapezoid".into(),
        original_curve: base,
        perturbed_curve: bumped,
        window: (ta, tb),
        geometry,
    })
}

/// Superellipse exponent of the rounded square.
pub const SQUARE_EXPONENT: u32 = 8;
/// Nose height over the chord width of its base.
pub const NOSE_ASPECT: f64 = 0.75;
/// Fraction of the window taken by each smooth ramp of the nose.
pub const NOSE_RAMP: f64 = 0.3;
/// Panel refinement tolerance on the nose, relative to panel length.
pub const NOSE_TOL: f64 = 1e-9;
/// Panels the nose starts from before adaptive refinement.
const NOSE_INITIAL_PANELS: usize = 8;

/// Rounded square with a flat-topped nose grown out of its left side.
///
/// Thinning: the cut is 8 panels, so the nose base and height both shrink like
/// `1/N_o`. Fixed: the cut is 10 panels at `N_o = 2000`, scaled with `N_o`, so the
/// nose keeps its shape. Either way the nose is refined from the same number of
/// initial panels and `N_p` stays roughly constant.
pub fn square_with_nose(n_o: usize, family: Family) -> Result<Scenario> {
    let panels = panel_count(n_o)?;
    let m = match family {
        Family::Shrinking => 8,
        Family::Fixed => ((10 * n_o) as f64 / 2000.0).round().max(1.0) as usize,
    };
    if m >= panels / 2 {
        return Err(Error::InvalidPerturbation(format!("{m} cut panels out of {panels}")));
    }
    let start = panels / 2 - m / 2;
    let (ta, tb) = panel_window(panels, start, m);
    let base = rounded_square(SQUARE_EXPONENT)?;
    let width = base.position(ta).dist(base.position(tb));
    let nosed = base.clone().with_displacement(Displacement::Plateau {
        start: ta,
        end: tb,
        ramp: NOSE_RAMP * (tb - ta),
        height: NOSE_ASPECT * width,
    });
    let original = closed_panels(&base, panels)?;
    let res = Resolution::Adaptive {
        order: PANEL_ORDER,
        breakpoints: staggered_breakpoints(ta, tb, NOSE_INITIAL_PANELS),
        max_length: 0.5 * width,
        tol: NOSE_TOL,
    };
    let geometry = make_perturbation(&base, &original, (ta, tb), &nosed, &res)?;
    Ok(Scenario {
        name: match family {
            Family::Shrinking => "nose-thinning".into(),
            Family::Fixed => "nose-fixed".into(),
        },
        original_curve: base,
        perturbed_curve: nosed,
        window: (ta, tb),
        geometry,
    })
}

/// Arms and amplitude of the star used by the refinement and rank studies.
pub const STAR_ARMS: u32 = 5;
pub const STAR_AMPLITUDE: f64 = 0.25;

/// Star with `N_o = 3200` where three panels are replaced by `3 * 2^level`
/// panels on the same arc, so `N_p = 48 * 2^level`.
pub fn star_with_refined_panels(level: u32) -> Result<Scenario> {
    if level == 0 || level > 8 {
        return Err(Error::InvalidArgument(format!("refinement level {level} outside 1..=8")));
    }
    star_refined(3200, 3, 40, level, "star-refine")
}

/// Star with `N_o = n` and a cut of `n / 16` nodes, refined once; the cut
/// sizes of the rank study.
pub fn star_rank_case(n_o: usize) -> Result<Scenario> {
    let panels = panel_count(n_o)?;
    if panels % 16 != 0 {
        return Err(Error::InvalidArgument(format!("N_o = {n_o} must be a multiple of 256")));
    }
    star_refined(n_o, panels / 16, panels / 8, 1, "star-rank")
}

fn star_refined(n_o: usize, m: usize, start: usize, level: u32, name: &str) -> Result<Scenario> {
    let panels = panel_count(n_o)?;
    let (ta, tb) = panel_window(panels, start, m);
    let curve = star(STAR_ARMS, STAR_AMPLITUDE)?;
    let original = closed_panels(&curve, panels)?;
    let res = Resolution::Panels {
        order: PANEL_ORDER,
        breakpoints: uniform_breakpoints(ta, tb, m << level),
    };
    let geometry = make_perturbation(&curve, &original, (ta, tb), &curve, &res)?;
    Ok(Scenario {
        name: name.into(),
        original_curve: curve.clone(),
        perturbed_curve: curve,
        window: (ta, tb),
        geometry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_bump_counts() {
        let s = circle_with_bump_trapezoid(4000, PI / 8.0).unwrap();
        let expected = 4000.0 * (PI / 8.0) / TAU;
        assert!((s.geometry.cut.len() as f64 - expected).abs() <= 1.0);
        assert_eq!(s.geometry.n_added(), s.geometry.cut.len());
    }

    #[test]
    fn shrinking_bump_keeps_counts() {
        for n in [2000, 4000] {
            let s = circle_with_bump(n, Family::Shrinking).unwrap();
            assert_eq!(s.geometry.cut.len(), 192);
            assert_eq!(s.geometry.n_added(), 224);
        }
    }

    #[test]
    fn star_refine_sizes() {
        let s = star_with_refined_panels(1).unwrap();
        assert_eq!(s.geometry.n_original(), 3200);
        assert_eq!(s.geometry.cut.len(), 48);
        assert_eq!(s.geometry.n_added(), 96);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(circle_with_bump_trapezoid(1000, 2.0).is_err());
        assert!(circle(-1.0).is_err());
        assert!(rounded_square(3).is_err());
        assert!(circle_with_bump(1000, Family::Shrinking).is_err());
    }
}
