//! Splitting roads so that each carries mass of at most one of two measures,
//! and carries it along its whole length.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measures::{merge_breaks, Density, Measure, MASS_TOL};
use crate::roadmap::{Address, Road, RoadId, RoadMap};

/// Maps addresses on the original map to addresses on the cracked one.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressRemap {
    /// Per original road: `(start coordinate, new road)` for each segment.
    segments: Vec<Vec<(f64, RoadId)>>,
}

impl AddressRemap {
    pub fn map(&self, a: &Address) -> Address {
        let segs = &self.segments[a.road];
        let i = segs.partition_point(|&(start, _)| start <= a.coord).saturating_sub(1);
        let (start, road) = segs[i];
        Address { road, coord: a.coord - start }
    }

    /// New roads that replace original road `r`, tail to head.
    pub fn pieces(&self, r: RoadId) -> impl Iterator<Item = RoadId> + '_ {
        self.segments[r].iter().map(|&(_, n)| n)
    }

    pub fn is_identity(&self) -> bool {
        self.segments.iter().enumerate().all(|(i, s)| s.len() == 1 && s[0].1 == i)
    }
}

#[derive(Debug, Clone)]
pub struct Cracked {
    pub map: RoadMap,
    pub src: Measure,
    pub dst: Measure,
    pub remap: AddressRemap,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Src,
    Dst,
}

/// Inserts degree-2 vertices wherever the support switches between the two
/// measures or between mass and no mass. Afterwards no road carries positive
/// mass of both, and a road that carries mass has a positive density along
/// its whole length. The measures must already be pointwise disjoint.
pub fn crack_roads(map: &RoadMap, src: &Measure, dst: &Measure) -> Result<Cracked> {
    let mut vertices = map.vertices().to_vec();
    let mut roads = Vec::new();
    let mut segments = Vec::with_capacity(map.num_roads());
    let mut new_src = BTreeMap::new();
    let mut new_dst = BTreeMap::new();

    for (r, road) in map.roads().iter().enumerate() {
        let zero = Density::zero(road.length)?;
        let ds = src.density(r).unwrap_or(&zero);
        let dd = dst.density(r).unwrap_or(&zero);
        let grid = merge_breaks(ds.breakpoints(), dd.breakpoints(), road.length);

        let mut cuts = Vec::new();
        let mut current = None;
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let (a, b) = (ds.value_at(mid), dd.value_at(mid));
            let side = match (a > MASS_TOL, b > MASS_TOL) {
                (true, true) => return Err(Error::OverlappingSupport { road: road.id.clone() }),
                (true, false) => Some(Side::Src),
                (false, true) => Some(Side::Dst),
                (false, false) => None,
            };
            if w[0] > 0.0 && side != current {
                cuts.push(w[0]);
            }
            current = side;
        }

        let clean = |d: &Density, a: f64, b: f64| {
            let piece = d.restrict(a, b);
            let values = piece.values().iter().map(|&v| if v > MASS_TOL { v } else { 0.0 }).collect();
            Density::new(piece.breakpoints().to_vec(), values).map(|d| d.simplified())
        };

        if cuts.is_empty() {
            let id = roads.len();
            segments.push(vec![(0.0, id)]);
            if let Some(d) = src.density(r) {
                new_src.insert(id, clean(d, 0.0, road.length)?);
            }
            if let Some(d) = dst.density(r) {
                new_dst.insert(id, clean(d, 0.0, road.length)?);
            }
            roads.push(road.clone());
            continue;
        }

        let mut bounds = vec![0.0];
        bounds.extend(&cuts);
        bounds.push(road.length);
        let mut segs = Vec::new();
        let mut tail = road.tail;
        for (k, w) in bounds.windows(2).enumerate() {
            let head = if k + 2 == bounds.len() {
                road.head
            } else {
                vertices.push(format!("{}@{}", road.id, k + 1));
                vertices.len() - 1
            };
            let id = roads.len();
            segs.push((w[0], id));
            roads.push(Road { id: format!("{}#{}", road.id, k), tail, head, length: w[1] - w[0] });
            let s = clean(ds, w[0], w[1])?;
            if !s.is_zero() {
                new_src.insert(id, s);
            }
            let d = clean(dd, w[0], w[1])?;
            if !d.is_zero() {
                new_dst.insert(id, d);
            }
            tail = head;
        }
        segments.push(segs);
    }

    Ok(Cracked {
        map: RoadMap::from_parts(vertices, roads)?,
        src: Measure::from_densities(new_src),
        dst: Measure::from_densities(new_dst),
        remap: AddressRemap { segments },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadmap::{validate_roadmap, RawRoad, RawRoadMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(length: f64) -> RoadMap {
        validate_roadmap(&RawRoadMap {
            vertices: vec!["a".into(), "b".into()],
            roads: vec![RawRoad { id: "r".into(), tail: "a".into(), head: "b".into(), length }],
        })
        .unwrap()
    }

    #[test]
    fn split_in_the_middle() {
        let map = line(2.0);
        let src = Measure::new(&map, [(0, Density::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0]).unwrap())]).unwrap();
        let dst = Measure::new(&map, [(0, Density::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).unwrap())]).unwrap();
        let c = crack_roads(&map, &src, &dst).unwrap();
        assert_eq!(c.map.num_roads(), 2);
        assert_eq!(c.map.num_vertices(), 3);
        assert_eq!(c.map.road(0).length, 1.0);
        assert_eq!(c.map.road(0).head, c.map.road(1).tail);
        assert_eq!(c.src.road_mass(0), 1.0);
        assert_eq!(c.dst.road_mass(1), 1.0);
        assert_eq!(c.src.road_mass(1), 0.0);
        let a = c.remap.map(&Address { road: 0, coord: 1.5 });
        assert_eq!(a, Address { road: 1, coord: 0.5 });
    }

    #[test]
    fn already_separated_is_identity() {
        let map = line(1.0);
        let src = Measure::uniform_masses(&map, &[(0, 1.0)]).unwrap();
        let c = crack_roads(&map, &src, &Measure::empty()).unwrap();
        assert!(c.remap.is_identity());
        assert_eq!(c.map.num_vertices(), 2);
    }

    #[test]
    fn overlap_is_rejected() {
        let map = line(1.0);
        let m = Measure::uniform_masses(&map, &[(0, 1.0)]).unwrap();
        assert!(matches!(crack_roads(&map, &m, &m), Err(Error::OverlappingSupport { .. })));
    }

    #[test]
    fn alternating_supports_preserve_distances() {
        // road "r" in a triangle so that around-routes matter
        let map = validate_roadmap(&RawRoadMap {
            vertices: vec!["a".into(), "b".into(), "c".into()],
            roads: vec![
                RawRoad { id: "r".into(), tail: "a".into(), head: "b".into(), length: 5.0 },
                RawRoad { id: "s".into(), tail: "b".into(), head: "c".into(), length: 1.0 },
                RawRoad { id: "t".into(), tail: "c".into(), head: "a".into(), length: 1.5 },
            ],
        })
        .unwrap();
        // pieces of length 1: src, gap, dst, src, dst gives 4 switches
        let breaks = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let src =
            Measure::new(&map, [(0, Density::new(breaks.clone(), vec![1.0, 0.0, 0.0, 1.0, 0.0]).unwrap())]).unwrap();
        let dst = Measure::new(&map, [(0, Density::new(breaks, vec![0.0, 0.0, 2.0, 0.0, 1.0]).unwrap())]).unwrap();
        let c = crack_roads(&map, &src, &dst).unwrap();
        assert_eq!(c.map.num_vertices(), 3 + 4);
        assert_eq!(c.map.num_roads(), 3 + 4);
        assert_eq!(c.src.road_mass(1) + c.dst.road_mass(1), 0.0);
        assert!((c.src.total() - src.total()).abs() < 1e-12);
        assert!((c.dst.total() - dst.total()).abs() < 1e-12);
        for r in 0..c.map.num_roads() {
            assert!(c.src.road_mass(r) * c.dst.road_mass(r) == 0.0);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let pick = |rng: &mut ChaCha8Rng| {
                let road = rng.random_range(0..3);
                Address { road, coord: rng.random_range(0.0..=map.road(road).length) }
            };
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            let before = map.distance(&a, &b).unwrap();
            let after = c.map.distance(&c.remap.map(&a), &c.remap.map(&b)).unwrap();
            assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
        }
    }
}
