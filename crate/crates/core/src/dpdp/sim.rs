//! Event-driven simulation of the gated nearest-neighbor fleet policy.
//!
//! Demands arrive as a Poisson process. They are served in batches: a batch
//! holds every demand that arrived while the previous batch was being served,
//! and a demand arriving to an empty system opens a batch at once. Within a
//! batch each free vehicle takes the unassigned demand whose pickup is nearest
//! to it, drives there, then to the delivery, and stays put afterwards.
//!
//! Random streams of one seed: 0 for inter-arrival times, 1 for demand
//! locations, 2 for initial vehicle positions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::DemandPmf;
use crate::error::{Error, Result};
use crate::roadmap::{point_distance, validate_roadmap, Address, RawRoad, RawRoadMap, RoadMap};

const ARRIVALS: u64 = 0;
const LOCATIONS: u64 = 1;
const INIT: u64 = 2;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: RoadMap,
    pub pmf: DemandPmf,
    pub vehicles: usize,
    /// Demands per unit time.
    pub rate: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.vehicles == 0 {
            return Err(Error::InvalidScenario("need at least one vehicle".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidScenario(format!("arrival rate {} must be positive", self.rate)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidScenario(format!("horizon {} must be nonnegative", self.horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceRecord {
    pub arrival: f64,
    pub start: f64,
    pub finish: f64,
    pub vehicle: usize,
    /// Sequence number of the batch the demand was served in.
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimResult {
    /// `(time, outstanding demands)` after every event up to the horizon.
    pub series: Vec<(f64, usize)>,
    /// Times at which the last outstanding demand was delivered.
    pub renewals: Vec<f64>,
    pub arrived: usize,
    pub completed: usize,
    /// Total driving time of completed services.
    pub busy_time: f64,
    pub services: Vec<ServiceRecord>,
    /// Batches `0..completed_batches` were fully served before the horizon.
    pub completed_batches: usize,
    pub horizon: f64,
}

impl SimResult {
    pub fn outstanding(&self) -> usize {
        self.arrived - self.completed
    }

    pub fn max_outstanding(&self) -> usize {
        self.series.iter().map(|p| p.1).max().unwrap_or(0)
    }

    /// `S_T / T`.
    pub fn completion_rate(&self) -> f64 {
        if self.horizon > 0.0 {
            self.completed as f64 / self.horizon
        } else {
            0.0
        }
    }

    /// Mean vehicle time per completed demand.
    pub fn mean_service_time(&self) -> Option<f64> {
        (self.completed > 0).then(|| self.busy_time / self.completed as f64)
    }

    /// Mean vehicle time per demand over fully served batches only. Within a
    /// batch the nearest-neighbor rule serves cheap pickups first, so a batch
    /// cut off by the horizon biases `mean_service_time` low.
    pub fn batch_service_time(&self) -> Option<f64> {
        let done = self.services.iter().filter(|s| s.batch < self.completed_batches);
        let (n, busy) = done.fold((0usize, 0.0), |(n, b), s| (n + 1, b + s.finish - s.start));
        (n > 0).then(|| busy / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival,
    Done(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Demand {
    arrival: f64,
    pickup: Address,
    delivery: Address,
}

struct Vehicle {
    pos: Address,
    job: Option<(Demand, f64, f64, usize)>,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

fn uniform_address<R: Rng>(map: &RoadMap, rng: &mut R) -> Address {
    let mut u = rng.random_range(0.0..map.total_length());
    for (r, road) in map.roads().iter().enumerate() {
        if u < road.length {
            return Address { road: r, coord: u };
        }
        u -= road.length;
    }
    let last = map.num_roads() - 1;
    Address { road: last, coord: map.road(last).length }
}

struct Sim<'a> {
    map: &'a RoadMap,
    heap: BinaryHeap<Event>,
    seq: u64,
    vehicles: Vec<Vehicle>,
    /// Unassigned demands of the current batch, in arrival order.
    batch: Vec<Demand>,
    /// Demands waiting for the next batch.
    waiting: Vec<Demand>,
    /// Batches opened so far; the current one is `opened - 1`.
    opened: usize,
    out: SimResult,
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event { time, seq: self.seq, kind });
        self.seq += 1;
    }

    fn dist(&self, a: &Address, b: &Address) -> f64 {
        point_distance(self.map, self.map.distances(), a, b).expect("sampled addresses lie on the map")
    }

    fn dispatch(&mut self, now: f64) {
        for v in 0..self.vehicles.len() {
            if self.batch.is_empty() {
                return;
            }
            if self.vehicles[v].job.is_some() {
                continue;
            }
            let pos = self.vehicles[v].pos;
            let mut best = (0, f64::INFINITY);
            for (i, d) in self.batch.iter().enumerate() {
                let x = self.dist(&pos, &d.pickup);
                if x < best.1 {
                    best = (i, x);
                }
            }
            let d = self.batch.remove(best.0);
            let drive = best.1 + self.dist(&d.pickup, &d.delivery);
            self.vehicles[v].job = Some((d, now, drive, self.opened - 1));
            self.push(now + drive, Kind::Done(v));
        }
    }

    fn idle(&self) -> bool {
        self.batch.is_empty() && self.vehicles.iter().all(|v| v.job.is_none())
    }

    fn open_batch(&mut self, now: f64) {
        self.batch = std::mem::take(&mut self.waiting);
        self.opened += 1;
        self.dispatch(now);
    }
}

pub fn simulate(sc: &Scenario) -> Result<SimResult> {
    sc.validate()?;
    let mut arrivals = stream(sc.seed, ARRIVALS);
    let mut locations = stream(sc.seed, LOCATIONS);
    let mut init = stream(sc.seed, INIT);
    let gap = Exp::new(sc.rate).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    let idx = sc.pmf.sampler();

    let vehicles = (0..sc.vehicles).map(|_| Vehicle { pos: uniform_address(&sc.map, &mut init), job: None }).collect();
    let mut sim = Sim {
        map: &sc.map,
        heap: BinaryHeap::new(),
        seq: 0,
        vehicles,
        batch: Vec::new(),
        waiting: Vec::new(),
        opened: 0,
        out: SimResult { horizon: sc.horizon, ..Default::default() },
    };
    let first = gap.sample(&mut arrivals);
    sim.push(first, Kind::Arrival);

    while let Some(ev) = sim.heap.pop() {
        if ev.time > sc.horizon {
            break;
        }
        let now = ev.time;
        match ev.kind {
            Kind::Arrival => {
                let (pickup, delivery) = sc.pmf.sample(&sc.map, &idx, &mut locations);
                let empty = sim.idle();
                sim.waiting.push(Demand { arrival: now, pickup, delivery });
                sim.out.arrived += 1;
                if empty {
                    sim.open_batch(now);
                }
                let next = now + gap.sample(&mut arrivals);
                sim.push(next, Kind::Arrival);
            }
            Kind::Done(v) => {
                let (d, start, drive, batch) = sim.vehicles[v].job.take().expect("completion of an assigned vehicle");
                sim.vehicles[v].pos = d.delivery;
                sim.out.completed += 1;
                sim.out.busy_time += drive;
                sim.out.services.push(ServiceRecord { arrival: d.arrival, start, finish: now, vehicle: v, batch });
                if !sim.batch.is_empty() {
                    sim.dispatch(now);
                } else if sim.idle() {
                    sim.out.completed_batches = sim.opened;
                    if !sim.waiting.is_empty() {
                        sim.open_batch(now);
                    }
                }
                if sim.out.outstanding() == 0 {
                    sim.out.renewals.push(now);
                }
            }
        }
        let n = sim.out.outstanding();
        sim.out.series.push((now, n));
    }
    Ok(sim.out)
}

/// A random test instance: a connected multigraph with 1 to 10 roads of
/// length uniform in [0.5, 2], a pmf over up to 6 random road pairs and a
/// fleet of 1 to 5 vehicles.
pub fn random_instance<R: Rng>(rng: &mut R) -> (RoadMap, DemandPmf, usize) {
    let roads = rng.random_range(1..=10usize);
    let nv = rng.random_range(1..=roads + 1);
    let vname = |i: usize| format!("v{i}");
    let mut raw = RawRoadMap { vertices: (0..nv).map(vname).collect(), roads: Vec::with_capacity(roads) };
    for k in 0..roads {
        // the first nv - 1 roads form a spanning tree
        let (a, b) = if k + 1 < nv {
            (k + 1, rng.random_range(0..=k))
        } else {
            (rng.random_range(0..nv), rng.random_range(0..nv))
        };
        let (tail, head) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        raw.roads.push(RawRoad {
            id: format!("r{k}"),
            tail: vname(tail),
            head: vname(head),
            length: rng.random_range(0.5..=2.0),
        });
    }
    let map = validate_roadmap(&raw).expect("generated map is connected");
    let pairs = rng.random_range(1..=6usize.min(roads * roads));
    let mut entries: Vec<_> = (0..pairs)
        .map(|_| (rng.random_range(0..roads), rng.random_range(0..roads), rng.random_range(0.05..1.0)))
        .collect();
    let total: f64 = entries.iter().map(|e| e.2).sum();
    for e in &mut entries {
        e.2 /= total;
    }
    let fix = 1.0 - entries.iter().map(|e| e.2).sum::<f64>();
    entries[0].2 += fix;
    let pmf = DemandPmf::new(&map, entries).expect("normalized pmf");
    (map, pmf, rng.random_range(1..=5))
}
