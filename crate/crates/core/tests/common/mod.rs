//! Independent oracles and instance generators shared by integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use roademd::measures::{Density, Measure};
use roademd::roadmap::{validate_roadmap, RawRoad, RawRoadMap, RoadMap};

pub fn map(vertices: &[&str], roads: &[(&str, &str, &str, f64)]) -> RoadMap {
    validate_roadmap(&RawRoadMap {
        vertices: vertices.iter().map(|s| s.to_string()).collect(),
        roads: roads
            .iter()
            .map(|&(id, t, h, l)| RawRoad { id: id.into(), tail: t.into(), head: h.into(), length: l })
            .collect(),
    })
    .unwrap()
}

pub fn square() -> (RoadMap, Measure, Measure) {
    let m = map(
        &["1", "2", "3", "4"],
        &[("N", "1", "2", 1.0), ("E", "2", "3", 1.0), ("S", "3", "4", 1.0), ("W", "4", "1", 1.0)],
    );
    let src = Measure::uniform_masses(&m, &[(1, 0.4), (2, 0.6)]).unwrap();
    let dst = Measure::uniform_masses(&m, &[(0, 0.2), (3, 0.8)]).unwrap();
    (m, src, dst)
}

/// Random step density with up to `max_pieces` pieces, some possibly zero.
pub fn random_density<R: Rng>(rng: &mut R, length: f64, max_pieces: usize) -> Density {
    let k = rng.random_range(1..=max_pieces);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.05..0.95) * length).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut breaks = vec![0.0];
    breaks.extend(cuts);
    breaks.push(length);
    let mut values: Vec<f64> =
        (0..breaks.len() - 1).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.1..2.0) }).collect();
    if values.iter().all(|&v| v == 0.0) {
        values[0] = 1.0;
    }
    Density::new(breaks, values).unwrap()
}

/// Random measure of unit total on a random nonempty subset of roads.
pub fn random_measure<R: Rng>(rng: &mut R, map: &RoadMap, max_pieces: usize) -> Measure {
    let mut roads: Vec<usize> = (0..map.num_roads()).collect();
    roads.shuffle(rng);
    let k = rng.random_range(1..=roads.len());
    let ds: Vec<_> = roads[..k].iter().map(|&r| (r, random_density(rng, map.road(r).length, max_pieces))).collect();
    let total: f64 = ds.iter().map(|(_, d)| d.total()).sum();
    Measure::new(map, ds.into_iter().map(|(r, d)| (r, d.scaled(1.0 / total)))).unwrap()
}

/// A path graph `v0 - v1 - ... - vk` with randomly oriented roads, together
/// with the offset of each road on the line and whether it runs backwards.
pub fn random_path_graph<R: Rng>(rng: &mut R, roads: usize) -> (RoadMap, Vec<(f64, bool)>) {
    let mut raw = RawRoadMap { vertices: (0..=roads).map(|i| format!("v{i}")).collect(), roads: Vec::new() };
    let mut place = Vec::new();
    let mut at = 0.0;
    for k in 0..roads {
        let length = rng.random_range(0.3..2.0);
        let flip = rng.random_bool(0.5);
        let (t, h) = if flip { (k + 1, k) } else { (k, k + 1) };
        raw.roads.push(RawRoad { id: format!("r{k}"), tail: format!("v{t}"), head: format!("v{h}"), length });
        place.push((at, flip));
        at += length;
    }
    (validate_roadmap(&raw).unwrap(), place)
}

/// `int |F_a - F_b|` on the line for measures placed on a path graph.
pub fn line_wasserstein(map: &RoadMap, place: &[(f64, bool)], a: &Measure, b: &Measure) -> f64 {
    // piecewise constant line densities as (left, right, value) triples
    let pieces = |m: &Measure| {
        let mut out = Vec::new();
        for (r, d) in m.iter() {
            let (off, flip) = place[r];
            let l = map.road(r).length;
            let bp = d.breakpoints();
            for (k, &v) in d.values().iter().enumerate() {
                let (x0, x1) =
                    if flip { (off + l - bp[k + 1], off + l - bp[k]) } else { (off + bp[k], off + bp[k + 1]) };
                out.push((x0, x1, v));
            }
        }
        out
    };
    let (pa, pb) = (pieces(a), pieces(b));
    let mut xs: Vec<f64> = pa.iter().chain(&pb).flat_map(|p| [p.0, p.1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let dens = |ps: &[(f64, f64, f64)], x: f64| ps.iter().filter(|p| p.0 <= x && x < p.1).map(|p| p.2).sum::<f64>();
    let mut diff = 0.0;
    let mut total = 0.0;
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let slope = dens(&pa, mid) - dens(&pb, mid);
        let (g0, g1) = (diff, diff + slope * (x1 - x0));
        total += if g0 * g1 >= 0.0 {
            0.5 * (g0.abs() + g1.abs()) * (x1 - x0)
        } else {
            0.5 * (g0 * g0 + g1 * g1) / slope.abs()
        };
        diff = g1;
    }
    total
}

/// Minimum of `sum c_ij x_ij` over transport plans, by trying every basis.
/// Only for tiny problems.
pub fn brute_force_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let vars: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(k);
    fn rec(start: usize, k: usize, pick: &mut Vec<usize>, vars: &[(usize, usize)], f: &mut dyn FnMut(&[usize])) {
        if pick.len() == k {
            f(pick);
            return;
        }
        for v in start..vars.len() {
            pick.push(v);
            rec(v + 1, k, pick, vars, f);
            pick.pop();
        }
    }
    let mut eval = |basis: &[usize]| {
        // rows: supply equations, then all but the last demand equation
        let mut a = vec![vec![0.0; k + 1]; k];
        for (c, &v) in basis.iter().enumerate() {
            let (i, j) = vars[v];
            a[i][c] = 1.0;
            if j + 1 < n {
                a[m + j][c] = 1.0;
            }
        }
        for i in 0..m {
            a[i][k] = supply[i];
        }
        for j in 0..n - 1 {
            a[m + j][k] = demand[j];
        }
        let Some(x) = solve(a) else { return };
        if x.iter().any(|&v| v < -1e-12) {
            return;
        }
        let c: f64 = basis.iter().zip(&x).map(|(&v, &xv)| cost[vars[v].0][vars[v].1] * xv).sum();
        best = best.min(c);
    };
    rec(0, k, &mut pick, &vars, &mut eval);
    best
}

/// Gaussian elimination on an augmented square system.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                let pivot = a[c].clone();
                for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

/// All-pairs shortest paths on a directed graph.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(u, v, w) in edges {
        d[u][v] = d[u][v].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let x = d[i][k] + d[k][j];
                if x < d[i][j] {
                    d[i][j] = x;
                }
            }
        }
    }
    d
}
