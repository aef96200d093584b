use super::curve::Curve;
use super::discretize::{discretize_panels, nodes_at, refine_panels, Discretization, Scheme};
use crate::error::{Error, Result};

/// Relative gluing tolerance between the new piece and the cut endpoints.
pub const GLUE_TOL: f64 = 1e-10;

/// How the replacement piece is discretized.
#[derive(Clone, Debug, PartialEq)]
pub enum Resolution {
    /// Reuse the parameters and weights of the cut nodes (trapezoidal rule).
    SameNodes,
    /// Composite Gauss on the given parameter breakpoints.
    Panels { order: usize, breakpoints: Vec<f64> },
    /// Composite Gauss, refined from `breakpoints` until every panel is
    /// shorter than `max_length` and its Legendre tail is below `tol` times its length.
    Adaptive {
        order: usize,
        breakpoints: Vec<f64>,
        max_length: f64,
        tol: f64,
    },
}

/// An original discretization Γ_o split into kept (Γ_k) and cut (Γ_c)
/// nodes, plus the added piece Γ_p.
///
/// Invariants: `kept` and `cut` partition `0..original.len()`, both sorted;
/// `cut` is a contiguous index range; Γ_p sits where Γ_c was in curve order.
#[derive(Clone, Debug)]
pub struct PerturbedGeometry {
    pub original: Discretization,
    pub kept: Vec<usize>,
    pub cut: Vec<usize>,
    pub added: Discretization,
}

/// Where a node of the perturbed curve comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrigin {
    Kept(usize),
    Added(usize),
}

impl PerturbedGeometry {
    /// Cuts nothing and adds nothing.
    pub fn identity(original: Discretization) -> Self {
        let n = original.len();
        Self {
            original,
            kept: (0..n).collect(),
            cut: Vec::new(),
            added: Discretization::empty(),
        }
    }

    pub fn n_original(&self) -> usize {
        self.original.len()
    }

    pub fn n_added(&self) -> usize {
        self.added.len()
    }

    /// Size of the extended system `N_o + N_p`.
    pub fn n_extended(&self) -> usize {
        self.original.len() + self.added.len()
    }

    /// Node origins of the perturbed curve Γ_k ∪ Γ_p in curve order.
    pub fn perturbed_order(&self) -> Vec<NodeOrigin> {
        let mut out = Vec::with_capacity(self.kept.len() + self.added.len());
        let insert_at = self.cut.first().copied().unwrap_or(self.original.len());
        let mut inserted = false;
        for &i in &self.kept {
            if !inserted && i > insert_at {
                out.extend((0..self.added.len()).map(NodeOrigin::Added));
                inserted = true;
            }
            out.push(NodeOrigin::Kept(i));
        }
        if !inserted {
            out.extend((0..self.added.len()).map(NodeOrigin::Added));
        }
        out
    }

    /// Discretization of the perturbed curve Γ_k ∪ Γ_p in curve order.
    pub fn perturbed(&self) -> Discretization {
        let mut d = Discretization::empty();
        for o in self.perturbed_order() {
            let (src, i) = match o {
                NodeOrigin::Kept(i) => (&self.original, i),
                NodeOrigin::Added(j) => (&self.added, j),
            };
            d.nodes.push(src.nodes[i]);
            d.normals.push(src.normals[i]);
            d.weights.push(src.weights[i]);
            d.curvature.push(src.curvature[i]);
            d.params.push(src.params[i]);
        }
        d
    }

    /// Gathers `[σ_k; σ_p]` in curve order from an extended vector `[σ_o; σ_p]`.
    pub fn perturbed_density(&self, extended: &[f64]) -> Vec<f64> {
        let no = self.original.len();
        self.perturbed_order()
            .into_iter()
            .map(|o| match o {
                NodeOrigin::Kept(i) => extended[i],
                NodeOrigin::Added(j) => extended[no + j],
            })
            .collect()
    }
}

/// Replaces the nodes of `original` with parameters in the open interval
/// `cut` by a discretization of `new_curve` over the same parameter window.
pub fn make_perturbation(
    original_curve: &dyn Curve,
    original: &Discretization,
    cut: (f64, f64),
    new_curve: &dyn Curve,
    resolution: &Resolution,
) -> Result<PerturbedGeometry> {
    let (ta, tb) = cut;
    if tb <= ta {
        return Err(Error::InvalidPerturbation(format!("empty parameter window [{ta}, {tb}]")));
    }
    let cut_idx: Vec<usize> = (0..original.len())
        .filter(|&i| original.params[i] > ta && original.params[i] < tb)
        .collect();
    if cut_idx.is_empty() {
        return Err(Error::InvalidPerturbation("the cut contains no nodes".into()));
    }
    if cut_idx.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidPerturbation("the cut is not contiguous".into()));
    }
    if let Scheme::Panels { order, breakpoints } = &original.scheme {
        let inside = |t: f64| t > ta && t < tb;
        for (p, w) in breakpoints.windows(2).enumerate() {
            let first = inside(original.params[p * order]);
            if (0..*order).any(|j| inside(original.params[p * order + j]) != first) {
                return Err(Error::InvalidPerturbation(format!(
                    "the cut splits panel [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
    }

    let perim = original.perimeter();
    for t in [ta, tb] {
        let gap = original_curve.position(t).dist(new_curve.position(t));
        if gap > GLUE_TOL * perim {
            return Err(Error::InvalidPerturbation(format!(
                "new piece misses the cut endpoint at t = {t} by {gap:e}"
            )));
        }
    }

    let added = match resolution {
        Resolution::SameNodes => {
            let h = match original.scheme {
                Scheme::Trapezoidal => {
                    let (a, b) = original_curve.domain();
                    (b - a) / original.len() as f64
                }
                _ => {
                    return Err(Error::InvalidPerturbation(
                        "same-node resolution needs a trapezoidal original".into(),
                    ))
                }
            };
            let params: Vec<f64> = cut_idx.iter().map(|&i| original.params[i]).collect();
            nodes_at(new_curve, &params, h, Scheme::Trapezoidal)?
        }
        Resolution::Panels { order, breakpoints } => {
            check_window(breakpoints, ta, tb)?;
            discretize_panels(new_curve, breakpoints, *order)?
        }
        Resolution::Adaptive {
            order,
            breakpoints,
            max_length,
            tol,
        } => {
            check_window(breakpoints, ta, tb)?;
            let bp = refine_panels(new_curve, breakpoints, *order, *max_length, *tol);
            discretize_panels(new_curve, &bp, *order)?
        }
    };

    let cut_range = cut_idx[0]..=cut_idx[cut_idx.len() - 1];
    let kept: Vec<usize> = (0..original.len()).filter(|i| !cut_range.contains(i)).collect();
    let floor = 1e-12 * perim;
    for (j, q) in added.nodes.iter().enumerate() {
        if let Some(&i) = kept.iter().find(|&&i| original.nodes[i].dist(*q) <= floor) {
            return Err(Error::InvalidPerturbation(format!(
                "added node {j} coincides with kept node {i}"
            )));
        }
    }
    Ok(PerturbedGeometry {
        original: original.clone(),
        kept,
        cut: cut_idx,
        added,
    })
}

fn check_window(bp: &[f64], ta: f64, tb: f64) -> Result<()> {
    let tol = 1e-12 * (1.0 + ta.abs().max(tb.abs()));
    match (bp.first(), bp.last()) {
        (Some(&a), Some(&b)) if (a - ta).abs() <= tol && (b - tb).abs() <= tol => Ok(()),
        _ => Err(Error::InvalidPerturbation(
            "new-piece breakpoints must span the cut window".into(),
        )),
    }
}
