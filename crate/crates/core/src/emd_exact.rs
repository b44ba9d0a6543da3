//! The exact Earth Mover's Distance as a convex-cost min-cost flow.
//!
//! Every road becomes a vertex of the flow network next to the roadmap
//! vertices. A supply road sends its mass out through two decision edges,
//! `tconn = (r, tail)` and `hconn = (r, head)`; a demand road receives
//! through the reversed pair. Pushing `x` units through `tconn` costs
//! `q(x; phi_r)` (the leftmost `x` units travel to the tail), and through
//! `hconn` costs `q(x; chi_r)` with `chi_r` the mirrored density. Between
//! roadmap vertices, routing edges carry mass at linear cost equal to the
//! shortest joining road. The min-cost flow value is the EMD.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{
    check_admissible, decompose_paths, min_cost_flow_convex, ConvexSolverOptions, Edge, EdgeCost, EdgeId, Flow,
    FlowNetwork,
};
use crate::measures::{pointwise_min, subtract, Density, Measure, MASS_TOL};
use crate::roadmap::{crack_roads, AddressRemap, RoadId, RoadMap, VertexId};

/// Totals of the two measures must agree within this tolerance.
pub const TOTAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadClass {
    Supply,
    Demand,
    Transshipment,
}

/// Splits roads by surplus `b(r) = src(r) - dst(r)`.
pub fn classify_roads(map: &RoadMap, src: &Measure, dst: &Measure) -> Result<Vec<RoadClass>> {
    (0..map.num_roads())
        .map(|r| {
            let (s, d) = (src.road_mass(r), dst.road_mass(r));
            match (s > MASS_TOL, d > MASS_TOL) {
                (true, true) => Err(Error::MixedRoad { road: map.road(r).id.clone() }),
                (true, false) => Ok(RoadClass::Supply),
                (false, true) => Ok(RoadClass::Demand),
                (false, false) => Ok(RoadClass::Transshipment),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactEdge {
    TailConn(RoadId),
    HeadConn(RoadId),
    Routing(VertexId, VertexId),
}

/// The flow network whose convex min-cost flow equals the EMD. Vertices
/// `0..|V|` are roadmap vertices and `|V| + r` is road `r`.
#[derive(Debug, Clone)]
pub struct WassersteinNetwork {
    pub net: FlowNetwork,
    pub costs: Vec<EdgeCost>,
    pub kinds: Vec<ExactEdge>,
    pub classes: Vec<RoadClass>,
    /// Active density of each non-transshipment road.
    pub densities: Vec<Option<Density>>,
    num_map_vertices: usize,
}

impl WassersteinNetwork {
    pub fn road_vertex(&self, r: RoadId) -> usize {
        self.num_map_vertices + r
    }

    pub fn num_map_vertices(&self) -> usize {
        self.num_map_vertices
    }

    pub fn tconn(&self, r: RoadId) -> Option<EdgeId> {
        self.kinds.iter().position(|k| *k == ExactEdge::TailConn(r))
    }

    pub fn hconn(&self, r: RoadId) -> Option<EdgeId> {
        self.kinds.iter().position(|k| *k == ExactEdge::HeadConn(r))
    }

    pub fn num_decision_edges(&self) -> usize {
        self.kinds.iter().filter(|k| !matches!(k, ExactEdge::Routing(..))).count()
    }

    pub fn num_routing_edges(&self) -> usize {
        self.kinds.len() - self.num_decision_edges()
    }

    /// Cost incurred on each edge by `flow`.
    pub fn edge_costs(&self, flow: &[f64]) -> Vec<f64> {
        self.costs.iter().zip(flow).map(|(c, &x)| c.value(x)).collect()
    }
}

fn check_totals(src: &Measure, dst: &Measure) -> Result<()> {
    let (s, d) = (src.total(), dst.total());
    if (s - d).abs() > TOTAL_TOL {
        return Err(Error::UnequalMass { source_mass: s, target_mass: d });
    }
    Ok(())
}

/// Builds the network for measures that already put mass of at most one
/// measure on each road.
pub fn build_wasserstein_network(map: &RoadMap, src: &Measure, dst: &Measure) -> Result<WassersteinNetwork> {
    check_totals(src, dst)?;
    let classes = classify_roads(map, src, dst)?;
    let nv = map.num_vertices();
    let mut labels: Vec<String> = map.vertices().to_vec();
    labels.extend(map.roads().iter().map(|r| r.id.clone()));

    let mut supply = vec![0.0; nv + map.num_roads()];
    let mut edges = Vec::new();
    let mut costs = Vec::new();
    let mut kinds = Vec::new();
    let mut densities = vec![None; map.num_roads()];

    for (r, road) in map.roads().iter().enumerate() {
        let rv = nv + r;
        let (phi, outward) = match classes[r] {
            RoadClass::Transshipment => continue,
            RoadClass::Supply => (src.density(r).unwrap().clone(), true),
            RoadClass::Demand => (dst.density(r).unwrap().clone(), false),
        };
        supply[rv] = if outward { phi.total() } else { -phi.total() };
        let chi = phi.reverse();
        for (end, kind, cost) in
            [(road.tail, ExactEdge::TailConn(r), phi.clone()), (road.head, ExactEdge::HeadConn(r), chi)]
        {
            edges.push(if outward { Edge { tail: rv, head: end } } else { Edge { tail: end, head: rv } });
            costs.push(EdgeCost::Convex(Arc::new(cost)));
            kinds.push(kind);
        }
        densities[r] = Some(phi);
    }

    for (u, v, w) in map.adjacent_pairs() {
        for (a, b) in [(u, v), (v, u)] {
            edges.push(Edge { tail: a, head: b });
            costs.push(EdgeCost::Linear(w));
            kinds.push(ExactEdge::Routing(a, b));
        }
    }

    let net = FlowNetwork::new(labels, edges, supply)?;
    Ok(WassersteinNetwork { net, costs, kinds, classes, densities, num_map_vertices: nv })
}

/// Measures reduced to the form the network constructions need: the common
/// part removed and roads cracked so that each carries at most one measure.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub map: RoadMap,
    pub src: Measure,
    pub dst: Measure,
    /// Converts addresses on the input map to addresses on `map`.
    pub remap: AddressRemap,
}

pub fn prepare(map: &RoadMap, src: &Measure, dst: &Measure) -> Result<Prepared> {
    check_totals(src, dst)?;
    let common = pointwise_min(src, dst);
    let src = subtract(src, &common)?;
    let dst = subtract(dst, &common)?;
    let cracked = crack_roads(map, &src, &dst)?;
    Ok(Prepared { map: cracked.map, src: cracked.src, dst: cracked.dst, remap: cracked.remap })
}

#[derive(Debug, Clone)]
pub struct EmdExact {
    pub value: f64,
    pub flow: Flow,
    pub network: WassersteinNetwork,
    pub prepared: Prepared,
    /// Frank-Wolfe gap; `value - W <= gap`.
    pub gap: f64,
    pub iterations: usize,
}

/// `W(src, dst)` on the road map.
pub fn emd_exact(map: &RoadMap, src: &Measure, dst: &Measure, opts: &ConvexSolverOptions) -> Result<EmdExact> {
    let prepared = prepare(map, src, dst)?;
    let network = build_wasserstein_network(&prepared.map, &prepared.src, &prepared.dst)?;
    let sol = min_cost_flow_convex(&network.net, &network.costs, opts)?;
    Ok(EmdExact { value: sol.cost, flow: sol.flow, network, prepared, gap: sol.gap, iterations: sol.iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSplit {
    pub road: RoadId,
    pub class: RoadClass,
    /// `y* = Psi(f(tconn))`: mass left of it moves through the tail.
    pub split: f64,
    pub via_tail: f64,
    pub via_head: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteReport {
    pub from: RoadId,
    pub to: RoadId,
    /// Labels along the path, from the supply road to the demand road.
    pub path: Vec<String>,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportReport {
    pub splits: Vec<RoadSplit>,
    pub routes: Vec<RouteReport>,
}

/// Reads off where each road's mass is split between its endpoints and
/// which supply roads serve which demand roads along which paths.
pub fn interpret_flow(netw: &WassersteinNetwork, flow: &[f64]) -> Result<TransportReport> {
    let adm = check_admissible(&netw.net, flow)?;
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.max_violation));
    }
    let mut splits = Vec::new();
    for (r, class) in netw.classes.iter().enumerate() {
        let (Some(phi), Some(t), Some(h)) = (&netw.densities[r], netw.tconn(r), netw.hconn(r)) else { continue };
        let via_tail = flow[t].clamp(0.0, phi.total());
        splits.push(RoadSplit {
            road: r,
            class: *class,
            split: phi.inverse_cdf(via_tail)?,
            via_tail,
            via_head: flow[h],
        });
    }
    let nv = netw.num_map_vertices;
    let routes = decompose_paths(&netw.net, flow)?
        .paths()
        .map(|p| RouteReport {
            from: p.vertices[0] - nv,
            to: p.vertices.last().unwrap() - nv,
            path: p.vertices.iter().map(|&v| netw.net.label(v).to_string()).collect(),
            volume: p.volume,
        })
        .collect();
    Ok(TransportReport { splits, routes })
}

impl fmt::Display for TransportReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.splits {
            let what = if s.class == RoadClass::Supply { "sends" } else { "receives" };
            writeln!(
                f,
                "road #{} {} {:.6} via tail, {:.6} via head (split at y* = {:.6})",
                s.road, what, s.via_tail, s.via_head, s.split
            )?;
        }
        for r in &self.routes {
            writeln!(f, "{:.6} along {}", r.volume, r.path.join("-"))?;
        }
        Ok(())
    }
}
