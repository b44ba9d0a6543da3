//! Uncapacitated min-cost flow by successive shortest paths.
//!
//! Each round runs Dijkstra on reduced costs from every vertex with remaining
//! supply at once, augments along the path to the nearest vertex with
//! remaining demand and then raises the potentials. On exit the potentials
//! certify optimality: every edge has nonnegative reduced cost and every
//! edge carrying flow has zero reduced cost.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EdgeId, Flow, FlowNetwork, VertexId};
use crate::error::{Error, Result};

/// Supplies below this are treated as exhausted.
const ZERO: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub flow: Flow,
    pub cost: f64,
    /// Vertex potentials; `w_e + pi(tail) - pi(head) >= 0` on every edge.
    pub potentials: Vec<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    vertex: VertexId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy)]
enum Arc {
    Forward(EdgeId),
    Backward(EdgeId),
}

pub fn min_cost_flow_linear(net: &FlowNetwork, weights: &[f64]) -> Result<LinearSolution> {
    let m = net.num_edges();
    if weights.len() != m {
        return Err(Error::FlowLength { expected: m, got: weights.len() });
    }
    if let Some((edge, &weight)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::NegativeWeight { edge, weight });
    }
    let n = net.num_vertices();
    // arcs leaving each vertex, in edge-id order: forward arcs of out-edges
    // and backward arcs of in-edges
    let mut out: Vec<Vec<Arc>> = vec![Vec::new(); n];
    for (e, edge) in net.edges().iter().enumerate() {
        out[edge.tail].push(Arc::Forward(e));
        out[edge.head].push(Arc::Backward(e));
    }

    let mut flow = vec![0.0; m];
    let mut excess: Vec<f64> = net.supplies().to_vec();
    let mut pi = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<Arc>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();

    loop {
        if !excess.iter().any(|&x| x > ZERO) {
            break;
        }
        dist.fill(f64::INFINITY);
        pred.fill(None);
        done.fill(false);
        heap.clear();
        for v in (0..n).filter(|&v| excess[v] > ZERO) {
            dist[v] = 0.0;
            heap.push(Entry { dist: 0.0, vertex: v });
        }
        let mut target = None;
        while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            if excess[u] < -ZERO {
                target = Some(u);
                break;
            }
            for &arc in &out[u] {
                let (v, reduced) = match arc {
                    Arc::Forward(e) => {
                        let h = net.edge(e).head;
                        (h, weights[e] + pi[u] - pi[h])
                    }
                    Arc::Backward(e) => {
                        if flow[e] <= ZERO {
                            continue;
                        }
                        let t = net.edge(e).tail;
                        (t, -weights[e] + pi[u] - pi[t])
                    }
                };
                let nd = d + reduced.max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some(arc);
                    heap.push(Entry { dist: nd, vertex: v });
                }
            }
        }

        let Some(t) = target else {
            let left: f64 = excess.iter().filter(|&&x| x > 0.0).sum();
            if left <= 1e-12 {
                break;
            }
            return Err(Error::Infeasible(format!("{left} units of supply cannot reach any demand")));
        };
        let dt = dist[t];
        for v in 0..n {
            pi[v] += dist[v].min(dt);
        }

        // walk back to the source, finding the bottleneck
        let mut delta = -excess[t];
        let mut v = t;
        while let Some(arc) = pred[v] {
            v = match arc {
                Arc::Forward(e) => net.edge(e).tail,
                Arc::Backward(e) => {
                    delta = delta.min(flow[e]);
                    net.edge(e).head
                }
            };
        }
        let s = v;
        delta = delta.min(excess[s]);

        let mut v = t;
        while let Some(arc) = pred[v] {
            v = match arc {
                Arc::Forward(e) => {
                    flow[e] += delta;
                    net.edge(e).tail
                }
                Arc::Backward(e) => {
                    flow[e] -= delta;
                    if flow[e] < ZERO {
                        flow[e] = 0.0;
                    }
                    net.edge(e).head
                }
            };
        }
        excess[s] -= delta;
        excess[t] += delta;
    }

    let cost = flow.iter().zip(weights).map(|(f, w)| f * w).sum();
    let sol = LinearSolution { flow, cost, potentials: pi };
    debug_assert!(reduced_cost_violation(net, weights, &sol) <= 1e-9);
    Ok(sol)
}

/// Largest violation of the reduced-cost optimality conditions: negative
/// reduced costs anywhere, or nonzero reduced costs on edges with flow.
pub fn reduced_cost_violation(net: &FlowNetwork, weights: &[f64], sol: &LinearSolution) -> f64 {
    let pi = &sol.potentials;
    net.edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let rc = weights[e] + pi[edge.tail] - pi[edge.head];
            if sol.flow[e] > 1e-12 {
                rc.abs()
            } else {
                (-rc).max(0.0)
            }
        })
        .fold(0.0, f64::max)
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
    fn single_edge() {
        let g = net(2, &[(0, 1)], &[1.0, -1.0]);
        let sol = min_cost_flow_linear(&g, &[5.0]).unwrap();
        assert_eq!(sol.flow, vec![1.0]);
        assert_eq!(sol.cost, 5.0);
    }

    #[test]
    fn bipartite_diagonal() {
        let g = net(4, &[(0, 2), (0, 3), (1, 2), (1, 3)], &[1.0, 1.0, -1.0, -1.0]);
        let w = [0.0, 1.0, 1.0, 0.0];
        let sol = min_cost_flow_linear(&g, &w).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.flow, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(reduced_cost_violation(&g, &w, &sol) <= 1e-12);
    }

    #[test]
    fn rerouting_uses_backward_arcs() {
        // supply 0 is greedy-matched to the cheap demand 2 first, then supply
        // 1 (which can only reach 2) forces a reroute of 0 to 3
        let g = net(4, &[(0, 2), (0, 3), (1, 2)], &[1.0, 1.0, -1.0, -1.0]);
        let w = [1.0, 2.0, 5.0];
        let sol = min_cost_flow_linear(&g, &w).unwrap();
        assert_eq!(sol.flow, vec![0.0, 1.0, 1.0]);
        assert_eq!(sol.cost, 7.0);
        assert!(reduced_cost_violation(&g, &w, &sol) <= 1e-12);
    }

    #[test]
    fn errors() {
        let g = net(2, &[(1, 0)], &[1.0, -1.0]);
        assert!(matches!(min_cost_flow_linear(&g, &[1.0]), Err(Error::Infeasible(_))));
        let g = net(2, &[(0, 1)], &[1.0, -1.0]);
        assert!(matches!(min_cost_flow_linear(&g, &[-1.0]), Err(Error::NegativeWeight { .. })));
        assert!(matches!(min_cost_flow_linear(&g, &[]), Err(Error::FlowLength { .. })));
    }

    #[test]
    fn zero_supplies_give_zero_flow() {
        let g = net(3, &[(0, 1), (1, 2)], &[0.0, 0.0, 0.0]);
        let sol = min_cost_flow_linear(&g, &[1.0, 1.0]).unwrap();
        assert_eq!(sol.flow, vec![0.0, 0.0]);
    }
}
