//! Convex-cost min-cost flow by Frank-Wolfe with pairwise steps.
//!
//! The linear minimization oracle is the successive-shortest-path solver run
//! on the current gradient. Gradients of the costs used here are
//! nonnegative, so the oracle returns acyclic vertex flows in which no edge
//! carries more than the total supply; the iterates therefore stay inside
//! the compact polytope `{admissible f : 0 <= f <= total supply}`.
//!
//! Iterates are kept as convex combinations of oracle vertices ("atoms").
//! Each step moves weight from the worst active atom to the new oracle
//! vertex, which converges linearly on polytopes where plain Frank-Wolfe
//! only manages `O(1/k)`. The Frank-Wolfe gap `<grad, x - s>` bounds the
//! suboptimality and is the stopping certificate.

use super::{min_cost_flow_linear, EdgeCost, Flow, FlowNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexSolverOptions {
    /// Target duality gap (absolute, on the objective).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ConvexSolverOptions {
    fn default() -> Self {
        ConvexSolverOptions { tol: 1e-7, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ConvexSolution {
    pub flow: Flow,
    pub cost: f64,
    /// Frank-Wolfe gap at the returned flow; `cost - optimum <= gap`.
    pub gap: f64,
    pub iterations: usize,
}

struct Atom {
    flow: Flow,
    weight: f64,
}

fn objective(costs: &[EdgeCost], x: &[f64]) -> f64 {
    costs.iter().zip(x).map(|(c, &v)| c.value(v)).sum()
}

fn gradient(costs: &[EdgeCost], x: &[f64]) -> Vec<f64> {
    costs.iter().zip(x).map(|(c, &v)| c.derivative(v).max(0.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn min_cost_flow_convex(
    net: &FlowNetwork,
    costs: &[EdgeCost],
    opts: &ConvexSolverOptions,
) -> Result<ConvexSolution> {
    let m = net.num_edges();
    if costs.len() != m {
        return Err(Error::FlowLength { expected: m, got: costs.len() });
    }
    if let Some((edge, weight)) = costs
        .iter()
        .enumerate()
        .find_map(|(e, c)| matches!(c, EdgeCost::Linear(w) if *w < 0.0).then(|| (e, c.derivative(0.0))))
    {
        return Err(Error::NegativeWeight { edge, weight });
    }

    let start = min_cost_flow_linear(net, &gradient(costs, &vec![0.0; m]))?.flow;
    let mut atoms = vec![Atom { flow: start.clone(), weight: 1.0 }];
    let mut x = start;
    let mut gap = f64::INFINITY;

    for it in 0..opts.max_iter {
        let g = gradient(costs, &x);
        let s = min_cost_flow_linear(net, &g)?.flow;
        let gx = dot(&g, &x);
        gap = gx - dot(&g, &s);
        if gap <= opts.tol {
            return Ok(ConvexSolution { cost: objective(costs, &x), flow: x, gap: gap.max(0.0), iterations: it });
        }

        let away = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (i, dot(&g, &a.flow)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap();
        let dir: Vec<f64> = s.iter().zip(&atoms[away].flow).map(|(a, b)| a - b).collect();
        let max_step = atoms[away].weight;
        let step = line_search(costs, &x, &dir, max_step);
        if step <= 0.0 {
            // no progress along the pairwise direction; the gap is at the
            // level of floating-point noise in the gradient
            break;
        }

        match atoms.iter().position(|a| same_flow(&a.flow, &s)) {
            Some(i) => atoms[i].weight += step,
            None => atoms.push(Atom { flow: s, weight: step }),
        }
        atoms[away].weight -= step;
        if step >= max_step || atoms[away].weight <= 1e-15 {
            atoms.remove(away);
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        x.fill(0.0);
        for a in &atoms {
            let w = a.weight / total;
            for (xe, fe) in x.iter_mut().zip(&a.flow) {
                *xe += w * fe;
            }
        }
    }

    let value = objective(costs, &x);
    if gap <= opts.tol {
        return Ok(ConvexSolution { cost: value, flow: x, gap, iterations: opts.max_iter });
    }
    Err(Error::NotConverged { gap, iterations: opts.max_iter, value })
}

fn same_flow(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Derivative of `t -> J(x + t d)`.
fn slope(costs: &[EdgeCost], x: &[f64], d: &[f64], t: f64) -> f64 {
    costs
        .iter()
        .zip(x.iter().zip(d))
        .filter(|(_, (_, &de))| de != 0.0)
        .map(|(c, (&xe, &de))| de * c.derivative(xe + t * de))
        .sum()
}

/// Minimizes `J(x + t d)` over `t in [0, max]`. Exact when every convex
/// cost is piecewise quadratic, bisection on the slope otherwise.
fn line_search(costs: &[EdgeCost], x: &[f64], d: &[f64], max: f64) -> f64 {
    let mut cuts = Vec::new();
    for (c, (&xe, &de)) in costs.iter().zip(x.iter().zip(d)) {
        if de == 0.0 {
            continue;
        }
        if let EdgeCost::Convex(c) = c {
            match c.quadratic_breakpoints() {
                Some(bps) => cuts.extend(bps.iter().map(|&b| (b - xe) / de).filter(|&t| t > 0.0 && t < max)),
                None => return bisect(costs, x, d, max),
            }
        }
    }
    cuts.push(max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * max.max(1.0));

    // the slope is affine between consecutive cuts
    let mut lo = 0.0;
    for &hi in &cuts {
        let w = hi - lo;
        if w <= 0.0 {
            continue;
        }
        let (t1, t3) = (lo + 0.25 * w, lo + 0.75 * w);
        let (g1, g3) = (slope(costs, x, d, t1), slope(costs, x, d, t3));
        let k = (g3 - g1) / (t3 - t1);
        let g_lo = g1 - 0.25 * w * k;
        let g_hi = g3 + 0.25 * w * k;
        if g_lo >= 0.0 {
            return lo;
        }
        if g_hi > 0.0 {
            return (lo - g_lo / k).clamp(lo, hi);
        }
        lo = hi;
    }
    max
}

fn bisect(costs: &[EdgeCost], x: &[f64], d: &[f64], max: f64) -> f64 {
    if slope(costs, x, d, max) <= 0.0 {
        return max;
    }
    let (mut lo, mut hi) = (0.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(costs, x, d, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 * max {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{check_admissible, ConvexCost, Edge};
    use crate::measures::Density;
    use std::sync::Arc;

    fn net(n: usize, edges: &[(usize, usize)], supply: &[f64]) -> FlowNetwork {
        FlowNetwork::new(
            (0..n).map(|i| i.to_string()).collect(),
            edges.iter().map(|&(tail, head)| Edge { tail, head }).collect(),
            supply.to_vec(),
        )
        .unwrap()
    }

    /// Golden-section minimization of a unimodal scalar function.
    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) <= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn symmetric_split_between_identical_sides() {
        // one supply vertex feeding one demand through two parallel edges
        // with identical quadratic costs
        let mass = 0.8;
        let g = net(2, &[(0, 1), (0, 1)], &[mass, -mass]);
        let d = Arc::new(Density::uniform(1.0, mass).unwrap());
        let costs = vec![EdgeCost::Convex(d.clone()), EdgeCost::Convex(d.clone())];
        let sol = min_cost_flow_convex(&g, &costs, &ConvexSolverOptions::default()).unwrap();
        let x_star = golden(|x| d.value(x) + d.value(mass - x), 0.0, mass);
        assert!((x_star - mass / 2.0).abs() < 1e-6);
        assert!((sol.flow[0] - x_star).abs() < 1e-6, "{:?}", sol.flow);
        assert!(sol.gap <= 1e-7);
    }

    #[test]
    fn all_linear_matches_linear_solver() {
        let g = net(4, &[(0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 2)], &[0.3, 0.7, -0.5, -0.5]);
        let w = [1.0, 4.0, 2.5, 1.0, 0.5, 0.25];
        let lin = min_cost_flow_linear(&g, &w).unwrap();
        let costs: Vec<_> = w.iter().map(|&x| EdgeCost::Linear(x)).collect();
        let sol = min_cost_flow_convex(&g, &costs, &ConvexSolverOptions::default()).unwrap();
        assert!((sol.cost - lin.cost).abs() <= 1e-7);
        assert!(check_admissible(&g, &sol.flow).unwrap().admissible);
    }

    #[test]
    fn zero_supplies() {
        let g = net(2, &[(0, 1)], &[0.0, 0.0]);
        let d = Arc::new(Density::uniform(1.0, 1.0).unwrap());
        let sol = min_cost_flow_convex(&g, &[EdgeCost::Convex(d)], &ConvexSolverOptions::default()).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.flow, vec![0.0]);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = net(2, &[(0, 1), (0, 1)], &[0.8, -0.8]);
        let a = Arc::new(Density::uniform(1.0, 0.8).unwrap());
        let b = Arc::new(Density::new(vec![0.0, 0.5, 1.0], vec![0.4, 1.2]).unwrap());
        let costs = vec![EdgeCost::Convex(a), EdgeCost::Convex(b)];
        let r = min_cost_flow_convex(&g, &costs, &ConvexSolverOptions { tol: 0.0, max_iter: 1 });
        assert!(matches!(r, Err(Error::NotConverged { iterations: 1, .. })));
    }
}
