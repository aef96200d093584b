//! Curves, Nyström discretizations and local perturbations.

mod curve;
mod discretize;
mod perturb;
pub mod shapes;

pub use curve::{smooth_step, wrap_angle, Curve, Displacement, Orientation, Point, PolarCurve, Profile};
pub use discretize::{
    discretize_panels, discretize_trapezoid, gauss_legendre, legendre_coefficients, nodes_at, refine_panels,
    uniform_breakpoints, Discretization, Scheme, MIN_TRAPEZOID_NODES,
};
pub use perturb::{make_perturbation, NodeOrigin, PerturbedGeometry, Resolution, GLUE_TOL};
pub use shapes::{Family, Scenario};
