//! Flow networks with vertex supplies, uncapacitated min-cost flow (linear
//! and convex edge costs) and path/cycle decomposition.

mod decompose;
mod frank_wolfe;
mod ssp;

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::Density;

pub use decompose::{decompose_paths, FlowPath, PathCycleFlow, PathKind};
pub use frank_wolfe::{min_cost_flow_convex, ConvexSolution, ConvexSolverOptions};
pub use ssp::{min_cost_flow_linear, reduced_cost_violation, LinearSolution};

/// Supplies must sum to zero within this tolerance.
pub const BALANCE_TOL: f64 = 1e-9;

/// Conservation tolerance for admissibility checks.
pub const CONSERVATION_TOL: f64 = 1e-9;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Edge flow volumes indexed by edge id.
pub type Flow = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
}

/// A directed multigraph with vertex supplies (positive: supply, negative:
/// demand, zero: transshipment).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    labels: Vec<String>,
    edges: Vec<Edge>,
    supply: Vec<f64>,
}

impl FlowNetwork {
    /// Builds a network. A net imbalance up to [`BALANCE_TOL`] is absorbed by
    /// rescaling the demands; anything larger is an error.
    pub fn new(labels: Vec<String>, edges: Vec<Edge>, mut supply: Vec<f64>) -> Result<Self> {
        if supply.len() != labels.len() {
            return Err(Error::Infeasible(format!("{} supplies for {} vertices", supply.len(), labels.len())));
        }
        if let Some(e) = edges.iter().find(|e| e.tail >= labels.len() || e.head >= labels.len()) {
            return Err(Error::Infeasible(format!("edge {:?} references a missing vertex", e)));
        }
        let pos: f64 = supply.iter().filter(|&&b| b > 0.0).sum();
        let neg: f64 = -supply.iter().filter(|&&b| b < 0.0).sum::<f64>();
        if (pos - neg).abs() > BALANCE_TOL {
            return Err(Error::Unbalanced(pos - neg));
        }
        if neg > 0.0 && pos != neg {
            let scale = pos / neg;
            for b in supply.iter_mut().filter(|b| **b < 0.0) {
                *b *= scale;
            }
        }
        Ok(FlowNetwork { labels, edges, supply })
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn supply(&self, v: VertexId) -> f64 {
        self.supply[v]
    }

    pub fn supplies(&self) -> &[f64] {
        &self.supply
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sum of positive supplies.
    pub fn total_supply(&self) -> f64 {
        self.supply.iter().filter(|&&b| b > 0.0).sum()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.edges.len() {
            return Err(Error::FlowLength { expected: self.edges.len(), got: f.len() });
        }
        Ok(())
    }

    /// `outflow - inflow - supply` at every vertex.
    pub fn imbalance(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let mut r: Vec<f64> = self.supply.iter().map(|b| -b).collect();
        for (e, &x) in self.edges.iter().zip(f) {
            r[e.tail] += x;
            r[e.head] -= x;
        }
        Ok(r)
    }
}

/// Convex edge cost with a subgradient oracle, defined on `[0, domain_max]`.
pub trait ConvexCost: Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// A subgradient at `x`; for piecewise-smooth costs the left derivative.
    fn derivative(&self, x: f64) -> f64;

    fn domain_max(&self) -> f64;

    /// Flow values between which the cost is exactly quadratic, if it is
    /// piecewise quadratic. Enables exact line searches.
    fn quadratic_breakpoints(&self) -> Option<&[f64]> {
        None
    }
}

/// The transport cost `q(x; phi)` of a road density.
impl ConvexCost for Density {
    fn value(&self, x: f64) -> f64 {
        self.q(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.psi(x.clamp(0.0, self.total())).0
    }

    fn domain_max(&self) -> f64 {
        self.total()
    }

    fn quadratic_breakpoints(&self) -> Option<&[f64]> {
        Some(self.mass_breakpoints())
    }
}

#[derive(Debug, Clone)]
pub enum EdgeCost {
    Linear(f64),
    Convex(Arc<dyn ConvexCost>),
}

impl EdgeCost {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            EdgeCost::Linear(w) => w * x,
            EdgeCost::Convex(c) => c.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            EdgeCost::Linear(w) => *w,
            EdgeCost::Convex(c) => c.derivative(x),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, EdgeCost::Linear(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// Largest conservation residual or negative flow magnitude.
    pub max_violation: f64,
}

/// Flow conservation (and nonnegativity) check.
pub fn check_admissible(net: &FlowNetwork, f: &[f64]) -> Result<Admissibility> {
    let r = net.imbalance(f)?;
    let conservation = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let negativity = f.iter().fold(0.0f64, |m, &x| m.max(-x));
    let max_violation = conservation.max(negativity);
    Ok(Admissibility { admissible: max_violation <= CONSERVATION_TOL, max_violation })
}

/// Total cost `sum_e c_e(f_e)`.
pub fn flow_cost(net: &FlowNetwork, f: &[f64], costs: &[EdgeCost]) -> Result<f64> {
    net.check_len(f)?;
    if costs.len() != f.len() {
        return Err(Error::FlowLength { expected: f.len(), got: costs.len() });
    }
    let mut total = 0.0;
    for (e, (c, &x)) in costs.iter().zip(f).enumerate() {
        if let EdgeCost::Convex(c) = c {
            let max = c.domain_max();
            if x < -CONSERVATION_TOL || x > max + CONSERVATION_TOL {
                return Err(Error::OutsideDomain { edge: e, flow: x, max });
            }
        }
        total += c.value(x);
    }
    Ok(total)
}
