//! Discretized approximations of the EMD.
//!
//! Both schemes cut every road into cells of length at most `eps`. The
//! bipartite scheme transports cell masses with per-pair distance bounds and
//! brackets the EMD from both sides. The path scheme replaces each supply or
//! demand road with a chain of cell vertices; its linear min-cost flow equals
//! the lower bound and exposes how each road's mass is split between its two
//! endpoints.

use crate::emd_exact::{prepare, Prepared, RoadClass};
use crate::error::{Error, Result};
use crate::flow::{min_cost_flow_linear, Edge, EdgeId, Flow, FlowNetwork};
use crate::measures::{Density, Measure};
use crate::roadmap::{RoadId, RoadMap, VertexDistances};

/// Flows at or below this count as zero when checking parting.
pub const PARTING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub road: RoadId,
    /// Position along the road, 0 at the tail.
    pub index: usize,
    pub a: f64,
    pub b: f64,
}

impl Cell {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn mass(&self, d: Option<&Density>) -> f64 {
        d.map_or(0.0, |d| (d.cdf_clamped(self.b) - d.cdf_clamped(self.a)).max(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct Tessellation {
    pub eps: f64,
    pub cells: Vec<Cell>,
    /// Per road: index of its first cell, cell count and cell length.
    pub roads: Vec<(usize, usize, f64)>,
}

impl Tessellation {
    pub fn road_cells(&self, r: RoadId) -> &[Cell] {
        let (start, n, _) = self.roads[r];
        &self.cells[start..start + n]
    }

    pub fn cell_len(&self, r: RoadId) -> f64 {
        self.roads[r].2
    }
}

pub fn tessellate(map: &RoadMap, eps: f64) -> Result<Tessellation> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let mut cells = Vec::new();
    let mut roads = Vec::with_capacity(map.num_roads());
    for (r, road) in map.roads().iter().enumerate() {
        // guard against ceil(1.0000000000000002) = 2 from rounding
        let n = ((road.length / eps) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let w = road.length / n as f64;
        roads.push((cells.len(), n, w));
        for k in 0..n {
            let b = if k + 1 == n { road.length } else { (k + 1) as f64 * w };
            cells.push(Cell { road: r, index: k, a: k as f64 * w, b });
        }
    }
    Ok(Tessellation { eps, cells, roads })
}

/// Bounds on `D(p, p')` over `p` in `c`, `p'` in `d`. The lower bound is the
/// exact minimum. The upper bound is the smallest per-route maximum, which is
/// at least the true maximum and at most `len(c) + len(d)` above the lower.
pub fn cell_distance_bounds(map: &RoadMap, dists: &VertexDistances, c: &Cell, d: &Cell) -> (f64, f64) {
    let (rc, rd) = (map.road(c.road), map.road(d.road));
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    if c.road == d.road {
        lo = (d.a - c.b).max(c.a - d.b).max(0.0);
        hi = (d.b - c.a).abs().max((c.b - d.a).abs());
    }
    // (vertex, near offset, far offset)
    let ends_c = [(rc.tail, c.a, c.b), (rc.head, rc.length - c.b, rc.length - c.a)];
    let ends_d = [(rd.tail, d.a, d.b), (rd.head, rd.length - d.b, rd.length - d.a)];
    for &(u, nu, fu) in &ends_c {
        for &(v, nv, fv) in &ends_d {
            let between = dists.get(u, v);
            lo = lo.min(nu + between + nv);
            hi = hi.min(fu + between + fv);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone)]
pub struct ApproxNetwork {
    pub net: FlowNetwork,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub supply_cells: Vec<Cell>,
    pub demand_cells: Vec<Cell>,
}

/// Complete bipartite transport between cells carrying source mass and cells
/// carrying target mass. Cells without mass are left out.
pub fn build_approx_network(map: &RoadMap, src: &Measure, dst: &Measure, tess: &Tessellation) -> Result<ApproxNetwork> {
    let with_mass = |m: &Measure| -> Vec<(Cell, f64)> {
        tess.cells.iter().map(|c| (*c, c.mass(m.density(c.road)))).filter(|(_, x)| *x > 0.0).collect()
    };
    let sup = with_mass(src);
    let dem = with_mass(dst);
    let mut labels = Vec::with_capacity(sup.len() + dem.len());
    let mut supply = Vec::with_capacity(sup.len() + dem.len());
    for (side, cells, sign) in [("+", &sup, 1.0), ("-", &dem, -1.0)] {
        for (c, x) in cells.iter() {
            labels.push(format!("{}{}[{}]", side, map.road(c.road).id, c.index));
            supply.push(sign * x);
        }
    }
    let mut edges = Vec::with_capacity(sup.len() * dem.len());
    let mut lower = Vec::with_capacity(edges.capacity());
    let mut upper = Vec::with_capacity(edges.capacity());
    for (i, (c, _)) in sup.iter().enumerate() {
        for (j, (d, _)) in dem.iter().enumerate() {
            let (lo, hi) = cell_distance_bounds(map, map.distances(), c, d);
            edges.push(Edge { tail: i, head: sup.len() + j });
            lower.push(lo);
            upper.push(hi);
        }
    }
    let net = FlowNetwork::new(labels, edges, supply)?;
    Ok(ApproxNetwork {
        net,
        lower,
        upper,
        supply_cells: sup.into_iter().map(|p| p.0).collect(),
        demand_cells: dem.into_iter().map(|p| p.0).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub vertices: usize,
    pub edges: usize,
}

/// Lower and upper bounds on the EMD at resolution `eps`, computed on
/// already prepared measures.
pub fn emd_bounds_prepared(p: &Prepared, eps: f64) -> Result<Bounds> {
    let tess = tessellate(&p.map, eps)?;
    let an = build_approx_network(&p.map, &p.src, &p.dst, &tess)?;
    let lower = min_cost_flow_linear(&an.net, &an.lower)?.cost;
    let upper = min_cost_flow_linear(&an.net, &an.upper)?.cost;
    Ok(Bounds { lower, upper, vertices: an.net.num_vertices(), edges: an.net.num_edges() })
}

/// `W_lower <= W(src, dst) <= W_upper` with `W_upper - W_lower <= 2 eps |src|`.
pub fn emd_bounds(map: &RoadMap, src: &Measure, dst: &Measure, eps: f64) -> Result<Bounds> {
    emd_bounds_prepared(&prepare(map, src, dst)?, eps)
}

/// Chain of cell vertices standing in for one supply or demand road.
#[derive(Debug, Clone)]
pub struct Device {
    pub road: RoadId,
    pub class: RoadClass,
    /// Network vertex of the first (tail-most) cell; cells are consecutive.
    pub first_vertex: usize,
    pub cells: usize,
    pub cell_len: f64,
    pub tconn: EdgeId,
    pub hconn: EdgeId,
    /// `forward[k]` joins cell `k` to cell `k + 1`, `backward[k]` the reverse.
    pub forward: Vec<EdgeId>,
    pub backward: Vec<EdgeId>,
}

impl Device {
    pub fn edges(&self) -> usize {
        2 + self.forward.len() + self.backward.len()
    }
}

#[derive(Debug, Clone)]
pub struct PathNetwork {
    pub net: FlowNetwork,
    pub weights: Vec<f64>,
    pub devices: Vec<Device>,
    pub tessellation: Tessellation,
}

pub fn build_path_network(map: &RoadMap, src: &Measure, dst: &Measure, eps: f64) -> Result<PathNetwork> {
    let classes = crate::emd_exact::classify_roads(map, src, dst)?;
    let tess = tessellate(map, eps)?;
    let mut labels: Vec<String> = map.vertices().to_vec();
    let mut supply = vec![0.0; labels.len()];
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    let mut devices = Vec::new();
    let mut push = |edges: &mut Vec<Edge>, tail, head, w| {
        edges.push(Edge { tail, head });
        weights.push(w);
        edges.len() - 1
    };

    for (r, road) in map.roads().iter().enumerate() {
        let (sign, density) = match classes[r] {
            RoadClass::Transshipment => continue,
            RoadClass::Supply => (1.0, src.density(r)),
            RoadClass::Demand => (-1.0, dst.density(r)),
        };
        let cells = tess.road_cells(r);
        let first = labels.len();
        for c in cells {
            labels.push(format!("{}[{}]", road.id, c.index));
            supply.push(sign * c.mass(density));
        }
        let last = first + cells.len() - 1;
        let outward = classes[r] == RoadClass::Supply;
        let (tconn, hconn) = if outward {
            (push(&mut edges, first, road.tail, 0.0), push(&mut edges, last, road.head, 0.0))
        } else {
            (push(&mut edges, road.tail, first, 0.0), push(&mut edges, road.head, last, 0.0))
        };
        let w = tess.cell_len(r);
        let forward = (first..last).map(|v| push(&mut edges, v, v + 1, w)).collect();
        let backward = (first..last).map(|v| push(&mut edges, v + 1, v, w)).collect();
        devices.push(Device {
            road: r,
            class: classes[r],
            first_vertex: first,
            cells: cells.len(),
            cell_len: w,
            tconn,
            hconn,
            forward,
            backward,
        });
    }
    for (u, v, w) in map.adjacent_pairs() {
        push(&mut edges, u, v, w);
        push(&mut edges, v, u, w);
    }
    let net = FlowNetwork::new(labels, edges, supply)?;
    Ok(PathNetwork { net, weights, devices, tessellation: tess })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parting {
    pub road: RoadId,
    /// Number of leading cells whose mass leaves through the tail side,
    /// counting the cell where the flow splits.
    pub index: usize,
    /// Cost of the device's chain edges.
    pub chain_cost: f64,
    /// `q(f(tconn); phi) + q(f(hconn); chi)` for the same attachment flows.
    pub q_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PathSolution {
    pub value: f64,
    pub flow: Flow,
    pub network: PathNetwork,
    pub partings: Vec<Parting>,
}

/// Locates the parting index of a device, or `None` if some flow heading to
/// the tail side sits at or beyond flow heading to the head side.
///
/// Positions: the tail attachment is 0, chain edge `k` (between cells `k` and
/// `k + 1`) is `k + 1` and the head attachment is the cell count.
pub fn parting_index(dev: &Device, flow: &[f64]) -> Option<usize> {
    let n = dev.cells;
    let (to_tail, to_head) = match dev.class {
        RoadClass::Demand => (&dev.forward, &dev.backward),
        _ => (&dev.backward, &dev.forward),
    };
    let pos = |edges: &Vec<EdgeId>, attach: EdgeId, at: usize| {
        let mut p: Vec<usize> =
            edges.iter().enumerate().filter(|(_, &e)| flow[e] > PARTING_TOL).map(|(k, _)| k + 1).collect();
        if flow[attach] > PARTING_TOL {
            p.push(at);
        }
        p
    };
    let tail_side = pos(to_tail, dev.tconn, 0);
    let head_side = pos(to_head, dev.hconn, n);
    let max_tail = tail_side.iter().copied().max();
    let min_head = head_side.iter().copied().min();
    match (max_tail, min_head) {
        (Some(t), Some(h)) if t >= h => None,
        (Some(t), _) => Some(t + 1),
        (None, _) => Some(0),
    }
}

/// Linear min-cost flow on the path network of prepared measures.
pub fn emd_path_prepared(p: &Prepared, eps: f64) -> Result<PathSolution> {
    let network = build_path_network(&p.map, &p.src, &p.dst, eps)?;
    let sol = min_cost_flow_linear(&network.net, &network.weights)?;
    let mut partings = Vec::with_capacity(network.devices.len());
    for dev in &network.devices {
        let index = parting_index(dev, &sol.flow).ok_or_else(|| Error::Unparted(p.map.road(dev.road).id.clone()))?;
        let chain_cost = dev.forward.iter().chain(&dev.backward).map(|&e| sol.flow[e] * dev.cell_len).sum();
        let phi = match dev.class {
            RoadClass::Demand => p.dst.density(dev.road),
            _ => p.src.density(dev.road),
        }
        .expect("device road carries mass");
        let q_cost = phi.q(sol.flow[dev.tconn]) + phi.reverse().q(sol.flow[dev.hconn]);
        partings.push(Parting { road: dev.road, index, chain_cost, q_cost });
    }
    Ok(PathSolution { value: sol.cost, flow: sol.flow, network, partings })
}

pub fn emd_path(map: &RoadMap, src: &Measure, dst: &Measure, eps: f64) -> Result<PathSolution> {
    emd_path_prepared(&prepare(map, src, dst)?, eps)
}
