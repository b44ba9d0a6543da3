use super::{check_admissible, EdgeId, FlowNetwork, VertexId};
use crate::error::{Error, Result};

/// Flows at or below this are treated as zero while peeling.
const ZERO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Simple path from a supply vertex to a demand vertex.
    Path,
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub kind: PathKind,
    pub edges: Vec<EdgeId>,
    /// Visited vertices; for cycles the first vertex is repeated at the end.
    pub vertices: Vec<VertexId>,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathCycleFlow {
    pub terms: Vec<FlowPath>,
}

impl PathCycleFlow {
    /// Arc flow induced by the decomposition.
    pub fn arc_flow(&self, num_edges: usize) -> Vec<f64> {
        let mut f = vec![0.0; num_edges];
        for t in &self.terms {
            for &e in &t.edges {
                f[e] += t.volume;
            }
        }
        f
    }

    pub fn paths(&self) -> impl Iterator<Item = &FlowPath> {
        self.terms.iter().filter(|t| t.kind == PathKind::Path)
    }

    pub fn cycles(&self) -> impl Iterator<Item = &FlowPath> {
        self.terms.iter().filter(|t| t.kind == PathKind::Cycle)
    }
}

/// Standard peeling decomposition of an admissible arc flow into
/// supply-to-demand paths and cycles. Out-edges are scanned in edge-id order.
pub fn decompose_paths(net: &FlowNetwork, f: &[f64]) -> Result<PathCycleFlow> {
    let adm = check_admissible(net, f)?;
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.max_violation));
    }
    let n = net.num_vertices();
    let mut out: Vec<Vec<EdgeId>> = vec![Vec::new(); n];
    for (e, edge) in net.edges().iter().enumerate() {
        out[edge.tail].push(e);
    }
    let mut rest: Vec<f64> = f.iter().map(|&x| if x > ZERO { x } else { 0.0 }).collect();
    let mut excess: Vec<f64> = net.supplies().to_vec();
    let mut terms = Vec::new();

    let next_edge = |rest: &[f64], u: VertexId| out[u].iter().copied().find(|&e| rest[e] > ZERO);

    // paths out of supply vertices
    for s in 0..n {
        while excess[s] > ZERO {
            let Some(term) = walk(net, &rest, &excess, s, &next_edge) else { break };
            let (kind, edges, vertices) = term;
            let mut vol = edges.iter().map(|&e| rest[e]).fold(f64::INFINITY, f64::min);
            if kind == PathKind::Path {
                vol = vol.min(excess[s]).min(-excess[*vertices.last().unwrap()]);
                excess[s] -= vol;
                excess[*vertices.last().unwrap()] += vol;
            }
            for &e in &edges {
                rest[e] -= vol;
                if rest[e] <= ZERO {
                    rest[e] = 0.0;
                }
            }
            terms.push(FlowPath { kind, edges, vertices, volume: vol });
        }
    }
    // what remains is a circulation
    for s in 0..n {
        while next_edge(&rest, s).is_some() {
            let Some((kind, edges, vertices)) = walk(net, &rest, &excess, s, &next_edge) else { break };
            let vol = edges.iter().map(|&e| rest[e]).fold(f64::INFINITY, f64::min);
            for &e in &edges {
                rest[e] -= vol;
                if rest[e] <= ZERO {
                    rest[e] = 0.0;
                }
            }
            terms.push(FlowPath { kind, edges, vertices, volume: vol });
        }
    }
    Ok(PathCycleFlow { terms })
}

/// Follows positive residual flow from `s` until reaching a vertex with
/// unmet demand (a path) or revisiting a vertex (a cycle).
fn walk(
    net: &FlowNetwork,
    rest: &[f64],
    excess: &[f64],
    s: VertexId,
    next_edge: &impl Fn(&[f64], VertexId) -> Option<EdgeId>,
) -> Option<(PathKind, Vec<EdgeId>, Vec<VertexId>)> {
    let mut pos = vec![usize::MAX; net.num_vertices()];
    let mut vertices = vec![s];
    let mut edges = Vec::new();
    pos[s] = 0;
    let mut u = s;
    loop {
        if u != s && excess[u] < -ZERO {
            return Some((PathKind::Path, edges, vertices));
        }
        let e = next_edge(rest, u)?;
        let v = net.edge(e).head;
        edges.push(e);
        if pos[v] != usize::MAX {
            let start = pos[v];
            let mut cyc_vertices = vertices[start..].to_vec();
            cyc_vertices.push(v);
            return Some((PathKind::Cycle, edges[start..].to_vec(), cyc_vertices));
        }
        pos[v] = vertices.len();
        vertices.push(v);
        u = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Edge;

    fn net(n: usize, edges: &[(usize, usize)], supply: &[f64]) -> FlowNetwork {
        FlowNetwork::new(
            (0..n).map(|i| i.to_string()).collect(),
            edges.iter().map(|&(tail, head)| Edge { tail, head }).collect(),
            supply.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn zero_flow_is_empty() {
        let g = net(2, &[(0, 1)], &[0.0, 0.0]);
        assert!(decompose_paths(&g, &[0.0]).unwrap().terms.is_empty());
    }

    #[test]
    fn circulation_is_one_cycle() {
        let g = net(3, &[(0, 1), (1, 2), (2, 0)], &[0.0, 0.0, 0.0]);
        let d = decompose_paths(&g, &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].kind, PathKind::Cycle);
        assert_eq!(d.terms[0].volume, 2.0);
        assert_eq!(d.arc_flow(3), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn path_plus_cycle() {
        // 0 -> 1 -> 2 with a cycle 1 -> 3 -> 1 riding along
        let g = net(4, &[(0, 1), (1, 2), (1, 3), (3, 1)], &[1.0, 0.0, -1.0, 0.0]);
        let f = [1.0, 1.0, 0.5, 0.5];
        let d = decompose_paths(&g, &f).unwrap();
        assert_eq!(d.arc_flow(4), f.to_vec());
        assert_eq!(d.paths().count(), 1);
        assert_eq!(d.cycles().count(), 1);
        let p = d.paths().next().unwrap();
        assert_eq!(p.vertices.first(), Some(&0));
        assert_eq!(p.vertices.last(), Some(&2));
    }

    #[test]
    fn inadmissible_is_rejected() {
        let g = net(2, &[(0, 1)], &[1.0, -1.0]);
        assert!(matches!(decompose_paths(&g, &[0.5]), Err(Error::Inadmissible(_))));
    }
}
