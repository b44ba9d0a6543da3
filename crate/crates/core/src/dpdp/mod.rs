//! Dynamic pickup-and-delivery on a road map: the demand model, the
//! EMD-based service-time prediction and a discrete-event simulator.

mod sim;

pub use sim::{random_instance, simulate, Scenario, ServiceRecord, SimResult};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emd_exact::emd_exact;
use crate::error::{Error, Result};
use crate::flow::ConvexSolverOptions;
use crate::measures::Measure;
use crate::roadmap::{point_distance, Address, RoadId, RoadMap};

/// Probabilities must sum to one within this.
pub const PMF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPmfEntry {
    pub pickup: String,
    pub delivery: String,
    #[serde(deserialize_with = "crate::num::number")]
    pub probability: f64,
}

/// Joint distribution of (pickup road, delivery road). Coordinates are
/// uniform on each road given the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPmf {
    entries: Vec<(RoadId, RoadId, f64)>,
}

impl DemandPmf {
    pub fn new(map: &RoadMap, entries: Vec<(RoadId, RoadId, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidPmf("no entries".into()));
        }
        for &(p, d, x) in &entries {
            for r in [p, d] {
                if r >= map.num_roads() {
                    return Err(Error::UnknownRoad(format!("#{r}")));
                }
            }
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidPmf(format!("probability {x} is not a nonnegative number")));
            }
        }
        let total: f64 = entries.iter().map(|e| e.2).sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::InvalidPmf(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DemandPmf { entries })
    }

    pub fn from_raw(map: &RoadMap, raw: &[RawPmfEntry]) -> Result<Self> {
        let entries = raw
            .iter()
            .map(|e| Ok((map.road_id(&e.pickup)?, map.road_id(&e.delivery)?, e.probability)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(map, entries)
    }

    pub fn to_raw(&self, map: &RoadMap) -> Vec<RawPmfEntry> {
        self.entries
            .iter()
            .map(|&(p, d, x)| RawPmfEntry {
                pickup: map.road(p).id.clone(),
                delivery: map.road(d).id.clone(),
                probability: x,
            })
            .collect()
    }

    pub fn entries(&self) -> &[(RoadId, RoadId, f64)] {
        &self.entries
    }

    /// Draws a (pickup, delivery) pair of addresses.
    pub(crate) fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.entries.iter().map(|e| e.2)).expect("validated pmf")
    }

    pub(crate) fn sample<R: Rng>(&self, map: &RoadMap, idx: &WeightedIndex<f64>, rng: &mut R) -> (Address, Address) {
        let (p, d, _) = self.entries[idx.sample(rng)];
        let at = |r: RoadId, rng: &mut R| Address { road: r, coord: rng.random_range(0.0..=map.road(r).length) };
        let a = at(p, rng);
        (a, at(d, rng))
    }
}

/// Pickup and delivery marginals as uniform densities per road.
pub fn marginals(pmf: &DemandPmf, map: &RoadMap) -> Result<(Measure, Measure)> {
    let pick: Vec<_> = pmf.entries.iter().map(|&(p, _, x)| (p, x)).collect();
    let drop: Vec<_> = pmf.entries.iter().map(|&(_, d, x)| (d, x)).collect();
    Ok((Measure::uniform_masses(map, &pick)?, Measure::uniform_masses(map, &drop)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Half-width of the 95% confidence interval; zero for quadrature.
    pub half_width: f64,
}

/// `E[D(P, Q)]` for a pickup `P` and delivery `Q` drawn from the pmf.
pub fn expected_pd_distance(map: &RoadMap, pmf: &DemandPmf, method: Integration) -> Result<Estimate> {
    match method {
        Integration::Quadrature => {
            let value = pmf
                .entries
                .iter()
                .filter(|e| e.2 > 0.0)
                .map(|&(p, d, x)| {
                    let area = map.road(p).length * map.road(d).length;
                    x * pair_integral(map, p, d) / area
                })
                .sum();
            Ok(Estimate { value, half_width: 0.0 })
        }
        Integration::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::TooFewSamples(samples));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = pmf.sampler();
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..samples {
                let (a, b) = pmf.sample(map, &idx, &mut rng);
                let x = point_distance(map, map.distances(), &a, &b)?;
                sum += x;
                sq += x * x;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(Estimate { value: mean, half_width: 1.96 * (var / n).sqrt() })
        }
    }
}

/// `a y1 + b y2 + c`.
#[derive(Debug, Clone, Copy)]
struct Lin {
    a: f64,
    b: f64,
    c: f64,
}

/// `int_0^L1 int_0^L2 D((r1, y1), (r2, y2)) dy2 dy1`, exactly up to rounding.
///
/// `D` is the minimum of a few functions affine in `(y1, y2)`, so for fixed
/// `y1` it is piecewise linear in `y2` with kinks where two of them cross;
/// the trapezoid rule between those kinks is exact. The inner integral is
/// then piecewise quadratic in `y1`, changing form only where two crossing
/// lines meet, and Simpson's rule between those points is exact.
fn pair_integral(map: &RoadMap, r1: RoadId, r2: RoadId) -> f64 {
    let (p, q) = (map.road(r1), map.road(r2));
    let (l1, l2) = (p.length, q.length);
    let dv = map.distances();
    let mut fs = vec![
        Lin { a: 1.0, b: 1.0, c: dv.get(p.tail, q.tail) },
        Lin { a: 1.0, b: -1.0, c: dv.get(p.tail, q.head) + l2 },
        Lin { a: -1.0, b: 1.0, c: l1 + dv.get(p.head, q.tail) },
        Lin { a: -1.0, b: -1.0, c: l1 + l2 + dv.get(p.head, q.head) },
    ];
    if r1 == r2 {
        fs.push(Lin { a: 1.0, b: -1.0, c: 0.0 });
        fs.push(Lin { a: -1.0, b: 1.0, c: 0.0 });
    }
    let mut lines = vec![Lin { a: 0.0, b: 1.0, c: 0.0 }, Lin { a: 0.0, b: 1.0, c: -l2 }];
    for (i, f) in fs.iter().enumerate() {
        for g in &fs[i + 1..] {
            let l = Lin { a: f.a - g.a, b: f.b - g.b, c: f.c - g.c };
            if l.a != 0.0 || l.b != 0.0 {
                lines.push(l);
            }
        }
    }

    let mut outer = vec![0.0, l1];
    for (i, l) in lines.iter().enumerate() {
        if l.b == 0.0 {
            outer.push(-l.c / l.a);
            continue;
        }
        for m in &lines[i + 1..] {
            let det = l.a * m.b - m.a * l.b;
            if det.abs() > 1e-14 {
                outer.push((l.b * m.c - m.b * l.c) / det);
            }
        }
    }
    let outer = sorted_within(outer, l1);

    let d = |y1: f64, y2: f64| {
        let a = Address { road: r1, coord: y1.clamp(0.0, l1) };
        let b = Address { road: r2, coord: y2.clamp(0.0, l2) };
        point_distance(map, dv, &a, &b).expect("coordinates clamped to the roads")
    };
    let inner = |y1: f64| {
        let mut ys = vec![0.0, l2];
        ys.extend(lines.iter().filter(|l| l.b != 0.0).map(|l| -(l.a * y1 + l.c) / l.b));
        let ys = sorted_within(ys, l2);
        ys.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (d(y1, w[0]) + d(y1, w[1]))).sum::<f64>()
    };
    outer.windows(2).map(|w| (w[1] - w[0]) / 6.0 * (inner(w[0]) + 4.0 * inner(0.5 * (w[0] + w[1])) + inner(w[1]))).sum()
}

fn sorted_within(mut xs: Vec<f64>, hi: f64) -> Vec<f64> {
    xs.retain(|&x| x.is_finite() && (0.0..=hi).contains(&x));
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * hi.max(1.0));
    xs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServicePrediction {
    /// `E[D(P, Q)]`, the loaded travel per demand.
    pub loaded: f64,
    /// `W(pickups, deliveries)`, the empty travel per demand.
    pub empty: f64,
    /// Their sum, the mean vehicle time per demand.
    pub service_time: f64,
}

/// `s = E[D(P, Q)] + W(pickup marginal, delivery marginal)`.
pub fn predicted_service_time(map: &RoadMap, pmf: &DemandPmf, opts: &ConvexSolverOptions) -> Result<ServicePrediction> {
    let loaded = expected_pd_distance(map, pmf, Integration::Quadrature)?.value;
    let (pick, drop) = marginals(pmf, map)?;
    let empty = emd_exact(map, &pick, &drop, opts)?.value;
    Ok(ServicePrediction { loaded, empty, service_time: loaded + empty })
}

/// Largest sustainable arrival rate for `vehicles` unit-speed vehicles.
pub fn critical_rate(service_time: f64, vehicles: usize) -> f64 {
    vehicles as f64 / service_time
}
