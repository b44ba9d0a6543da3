//! Road networks as continuous metric spaces.
//!
//! A [`RoadMap`] is an undirected multigraph (loops and parallel roads
//! allowed) whose edges are roads with positive lengths. Every road carries a
//! fixed orientation `tail -> head` that is used only for addressing: a point
//! is the [`Address`] `(road, y)` with `0 <= y <= length`. Distances ignore
//! orientation.

mod crack;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crack::{crack_roads, AddressRemap, Cracked};

pub type VertexId = usize;
pub type RoadId = usize;

/// Unvalidated road description, as read from an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRoad {
    pub id: String,
    pub tail: String,
    pub head: String,
    #[serde(deserialize_with = "crate::num::number")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRoadMap {
    pub vertices: Vec<String>,
    pub roads: Vec<RawRoad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

impl Road {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// All-pairs shortest-path distances between roadmap vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexDistances {
    n: usize,
    table: Vec<f64>,
}

impl VertexDistances {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: VertexId, v: VertexId) -> f64 {
        self.table[u * self.n + v]
    }
}

#[derive(Debug, Clone)]
pub struct RoadMap {
    vertices: Vec<String>,
    roads: Vec<Road>,
    road_index: HashMap<String, RoadId>,
    vertex_index: HashMap<String, VertexId>,
    distances: VertexDistances,
}

/// Checks a raw description and builds the road map together with its
/// vertex distance table.
pub fn validate_roadmap(raw: &RawRoadMap) -> Result<RoadMap> {
    let mut vertex_index = HashMap::new();
    for (i, v) in raw.vertices.iter().enumerate() {
        if vertex_index.insert(v.clone(), i).is_some() {
            return Err(Error::DuplicateVertex(v.clone()));
        }
    }
    let mut roads = Vec::with_capacity(raw.roads.len());
    for r in &raw.roads {
        if !(r.length > 0.0) || !r.length.is_finite() {
            return Err(Error::NonPositiveLength { road: r.id.clone(), length: r.length });
        }
        let lookup = |name: &String| {
            vertex_index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownVertex { road: r.id.clone(), vertex: name.clone() })
        };
        roads.push(Road { id: r.id.clone(), tail: lookup(&r.tail)?, head: lookup(&r.head)?, length: r.length });
    }
    RoadMap::from_parts(raw.vertices.clone(), roads)
}

impl RoadMap {
    pub(crate) fn from_parts(vertices: Vec<String>, roads: Vec<Road>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMap);
        }
        let mut road_index = HashMap::new();
        for (i, r) in roads.iter().enumerate() {
            if road_index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateRoad(r.id.clone()));
            }
        }
        let vertex_index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let mut map = RoadMap {
            vertices,
            roads,
            road_index,
            vertex_index,
            distances: VertexDistances { n: 0, table: Vec::new() },
        };
        map.distances = vertex_distances(&map);
        if let Some(v) = (0..map.vertices.len()).find(|&v| !map.distances.get(0, v).is_finite()) {
            return Err(Error::Disconnected(map.vertices[v].clone()));
        }
        Ok(map)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn road(&self, r: RoadId) -> &Road {
        &self.roads[r]
    }

    pub fn road_id(&self, name: &str) -> Result<RoadId> {
        self.road_index.get(name).copied().ok_or_else(|| Error::UnknownRoad(name.to_string()))
    }

    pub fn vertex_id(&self, name: &str) -> Option<VertexId> {
        self.vertex_index.get(name).copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_roads(&self) -> usize {
        self.roads.len()
    }

    pub fn distances(&self) -> &VertexDistances {
        &self.distances
    }

    pub fn total_length(&self) -> f64 {
        self.roads.iter().map(|r| r.length).sum()
    }

    /// Shortest road between each pair of distinct adjacent vertices, as
    /// `(u, v, length)` with `u < v`, sorted by `(u, v)`.
    pub fn adjacent_pairs(&self) -> Vec<(VertexId, VertexId, f64)> {
        let mut best: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        for r in self.roads.iter().filter(|r| !r.is_loop()) {
            let key = (r.tail.min(r.head), r.tail.max(r.head));
            let e = best.entry(key).or_insert(f64::INFINITY);
            *e = e.min(r.length);
        }
        let mut pairs: Vec<_> = best.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        pairs.sort_by_key(|p| (p.0, p.1));
        pairs
    }

    pub fn to_raw(&self) -> RawRoadMap {
        RawRoadMap {
            vertices: self.vertices.clone(),
            roads: self
                .roads
                .iter()
                .map(|r| RawRoad {
                    id: r.id.clone(),
                    tail: self.vertices[r.tail].clone(),
                    head: self.vertices[r.head].clone(),
                    length: r.length,
                })
                .collect(),
        }
    }

    pub fn address(&self, road: RoadId, coord: f64) -> Result<Address> {
        let a = Address { road, coord };
        a.check(self)?;
        Ok(a)
    }

    pub fn vertex_address(&self, v: VertexId) -> Option<Address> {
        self.roads.iter().enumerate().find_map(|(i, r)| {
            if r.tail == v {
                Some(Address { road: i, coord: 0.0 })
            } else if r.head == v {
                Some(Address { road: i, coord: r.length })
            } else {
                None
            }
        })
    }

    /// Roadmap distance between two addresses.
    pub fn distance(&self, a: &Address, b: &Address) -> Result<f64> {
        point_distance(self, &self.distances, a, b)
    }
}

/// A point on the road map: a road and a coordinate measured from its tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Address {
    pub road: RoadId,
    pub coord: f64,
}

impl Address {
    fn check(&self, map: &RoadMap) -> Result<()> {
        let road = map.roads.get(self.road).ok_or_else(|| Error::UnknownRoad(format!("#{}", self.road)))?;
        if !(0.0..=road.length).contains(&self.coord) {
            return Err(Error::CoordOutOfRange { road: road.id.clone(), coord: self.coord, length: road.length });
        }
        Ok(())
    }

    /// The vertex this address aliases, if it sits on a road endpoint.
    pub fn endpoint(&self, map: &RoadMap) -> Option<VertexId> {
        let road = map.road(self.road);
        if self.coord == 0.0 {
            Some(road.tail)
        } else if self.coord == road.length {
            Some(road.head)
        } else {
            None
        }
    }

    /// Point equality with endpoint coordinates canonicalized to vertices.
    pub fn same_point(&self, other: &Address, map: &RoadMap) -> bool {
        match (self.endpoint(map), other.endpoint(map)) {
            (Some(u), Some(v)) => u == v,
            (None, None) => self.road == other.road && self.coord == other.coord,
            _ => false,
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: VertexId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest paths, one Dijkstra run per source vertex. Unreachable
/// pairs are left at infinity.
pub fn vertex_distances(map: &RoadMap) -> VertexDistances {
    let n = map.vertices.len();
    let mut adj: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); n];
    for r in map.roads.iter().filter(|r| !r.is_loop()) {
        adj[r.tail].push((r.head, r.length));
        adj[r.head].push((r.tail, r.length));
    }
    let mut table = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        let row = &mut table[s * n..(s + 1) * n];
        row[s] = 0.0;
        heap.push(HeapEntry { dist: 0.0, vertex: s });
        while let Some(HeapEntry { dist, vertex }) = heap.pop() {
            if dist > row[vertex] {
                continue;
            }
            for &(w, len) in &adj[vertex] {
                let nd = dist + len;
                if nd < row[w] {
                    row[w] = nd;
                    heap.push(HeapEntry { dist: nd, vertex: w });
                }
            }
        }
    }
    // Force exact symmetry; the two Dijkstra runs can disagree in the last ulp.
    for u in 0..n {
        for v in (u + 1)..n {
            let m = table[u * n + v].min(table[v * n + u]);
            table[u * n + v] = m;
            table[v * n + u] = m;
        }
    }
    VertexDistances { n, table }
}

/// Shortest roadmap distance between two addresses: the direct same-road
/// route when both lie on one road, and the four endpoint-to-endpoint routes.
pub fn point_distance(map: &RoadMap, dists: &VertexDistances, a: &Address, b: &Address) -> Result<f64> {
    a.check(map)?;
    b.check(map)?;
    if a.same_point(b, map) {
        return Ok(0.0);
    }
    let ra = map.road(a.road);
    let rb = map.road(b.road);
    let mut best = if a.road == b.road { (a.coord - b.coord).abs() } else { f64::INFINITY };
    let exits_a = [(ra.tail, a.coord), (ra.head, ra.length - a.coord)];
    let exits_b = [(rb.tail, b.coord), (rb.head, rb.length - b.coord)];
    for &(ua, sa) in &exits_a {
        for &(ub, sb) in &exits_b {
            best = best.min(sa + dists.get(ua, ub) + sb);
        }
    }
    Ok(best)
}
