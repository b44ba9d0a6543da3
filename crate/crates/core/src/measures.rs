//! Piecewise-constant road densities and measures built from them.
//!
//! For a density `phi` on `[0, L]` this module provides the cdf
//! `Phi(y) = int_0^y phi`, its generalized inverse
//! `Psi(x) = inf { y : Phi(y) >= x }` and the transport cost
//! `q(x) = int_0^{Psi(x)} phi(y) y dy`, i.e. the cost of carrying the
//! leftmost `x` units of mass to the tail of the road. All three have closed
//! forms on step functions: `Phi` is piecewise linear, `Psi` piecewise linear
//! on the mass axis, and `q` piecewise quadratic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roadmap::{RoadId, RoadMap};

/// Absolute tolerance for mass comparisons.
pub const MASS_TOL: f64 = 1e-12;

/// Breakpoints closer than this are merged.
pub const BREAK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    breaks: Vec<f64>,
    values: Vec<f64>,
    /// `Phi` at each breakpoint.
    cum: Vec<f64>,
    /// `int_0^{b_k} phi(y) y dy` at each breakpoint.
    moment: Vec<f64>,
}

impl Density {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breaks.len() != values.len() + 1 {
            return Err(Error::InvalidDensity(format!("{} breakpoints for {} pieces", breaks.len(), values.len())));
        }
        if breaks[0] != 0.0 {
            return Err(Error::InvalidDensity("first breakpoint must be 0".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidDensity("breakpoints must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDensity("values must be finite and nonnegative".into()));
        }
        let mut cum = Vec::with_capacity(breaks.len());
        let mut moment = Vec::with_capacity(breaks.len());
        cum.push(0.0);
        moment.push(0.0);
        for (k, &v) in values.iter().enumerate() {
            let (a, b) = (breaks[k], breaks[k + 1]);
            cum.push(cum[k] + v * (b - a));
            moment.push(moment[k] + 0.5 * v * (b * b - a * a));
        }
        Ok(Density { breaks, values, cum, moment })
    }

    pub fn uniform(length: f64, value: f64) -> Result<Self> {
        Self::new(vec![0.0, length], vec![value])
    }

    pub fn zero(length: f64) -> Result<Self> {
        Self::uniform(length, 0.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn length(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Masses at which `Psi` (and hence the slope of `q`) changes formula.
    pub fn mass_breakpoints(&self) -> &[f64] {
        &self.cum
    }

    /// `int_0^L phi(y) y dy`.
    pub fn first_moment(&self) -> f64 {
        *self.moment.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn piece_of(&self, y: f64) -> usize {
        // last piece whose left end is <= y
        let k = self.breaks.partition_point(|&b| b <= y);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    /// Density value at `y` (right-continuous; the last piece covers `y = L`).
    pub fn value_at(&self, y: f64) -> f64 {
        self.values[self.piece_of(y)]
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        if !(0.0..=self.length()).contains(&y) {
            return Err(Error::CoordOutOfRange { road: String::from("<density>"), coord: y, length: self.length() });
        }
        Ok(self.cdf_clamped(y))
    }

    pub(crate) fn cdf_clamped(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.length());
        let k = self.piece_of(y);
        (self.cum[k] + self.values[k] * (y - self.breaks[k])).min(self.total())
    }

    fn check_mass(&self, x: f64) -> Result<f64> {
        let total = self.total();
        if x < -MASS_TOL || x > total + MASS_TOL || x.is_nan() {
            return Err(Error::MassOutOfRange { mass: x, total });
        }
        Ok(x.clamp(0.0, total))
    }

    /// `Psi(x) = inf { y : Phi(y) >= x }`. Across zero-density gaps this
    /// returns the left end of the gap.
    pub fn inverse_cdf(&self, x: f64) -> Result<f64> {
        let x = self.check_mass(x)?;
        Ok(self.psi(x).0)
    }

    /// `Psi(x)` together with the piece it falls in. Expects `x` in range.
    pub(crate) fn psi(&self, x: f64) -> (f64, usize) {
        if x <= 0.0 {
            return (0.0, 0);
        }
        // first piece k with cum[k + 1] >= x; such a piece has positive value
        let k = self.cum[1..].partition_point(|&c| c < x).min(self.values.len() - 1);
        let v = self.values[k];
        let y = if v > 0.0 { self.breaks[k] + (x - self.cum[k]) / v } else { self.breaks[k] };
        (y.clamp(self.breaks[k], self.breaks[k + 1]), k)
    }

    /// `q(x) = int_0^{Psi(x)} phi(y) y dy`.
    pub fn qcost(&self, x: f64) -> Result<f64> {
        let x = self.check_mass(x)?;
        Ok(self.q(x))
    }

    pub(crate) fn q(&self, x: f64) -> f64 {
        let (y, k) = self.psi(x.clamp(0.0, self.total()));
        let a = self.breaks[k];
        self.moment[k] + 0.5 * self.values[k] * (y * y - a * a)
    }

    /// `chi(y) = phi(L - y)`.
    pub fn reverse(&self) -> Density {
        let l = self.length();
        let mut breaks: Vec<f64> = self.breaks.iter().rev().map(|b| l - b).collect();
        breaks[0] = 0.0;
        *breaks.last_mut().unwrap() = l;
        let values = self.values.iter().rev().copied().collect();
        Density::new(breaks, values).expect("mirror of a valid density")
    }

    /// The piece of this density on `[a, b]`, shifted to start at 0.
    pub fn restrict(&self, a: f64, b: f64) -> Density {
        let mut breaks = vec![0.0];
        let mut values = Vec::new();
        for k in 0..self.values.len() {
            let lo = self.breaks[k].max(a);
            let hi = self.breaks[k + 1].min(b);
            if hi - lo > BREAK_TOL {
                values.push(self.values[k]);
                breaks.push(hi - a);
            }
        }
        if values.is_empty() {
            values.push(self.value_at(0.5 * (a + b)));
            breaks.push(b - a);
        }
        *breaks.last_mut().unwrap() = b - a;
        Density::new(breaks, values).expect("restriction of a valid density")
    }

    pub fn scaled(&self, c: f64) -> Density {
        Density::new(self.breaks.clone(), self.values.iter().map(|v| v * c).collect()).expect("nonnegative scale")
    }

    /// Combines two densities on the same road piece by piece over the
    /// union of their breakpoints.
    fn combine(&self, other: &Density, op: impl Fn(f64, f64) -> f64) -> Density {
        let l = self.length();
        let grid = merge_breaks(&self.breaks, &other.breaks, l);
        let values = grid
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                op(self.value_at(m), other.value_at(m))
            })
            .collect();
        Density::new(grid, values).expect("combination of valid densities")
    }

    pub fn min(&self, other: &Density) -> Density {
        self.combine(other, f64::min)
    }

    pub fn add(&self, other: &Density) -> Density {
        self.combine(other, |a, b| a + b)
    }

    fn sub(&self, other: &Density) -> Option<Density> {
        let ok = std::cell::Cell::new(true);
        let d = self.combine(other, |a, b| {
            if b > a + MASS_TOL {
                ok.set(false);
            }
            (a - b).max(0.0)
        });
        ok.get().then_some(d)
    }

    /// Merges adjacent pieces with equal values.
    pub fn simplified(&self) -> Density {
        let mut breaks = vec![0.0];
        let mut values: Vec<f64> = Vec::new();
        for (k, &v) in self.values.iter().enumerate() {
            if values.last() == Some(&v) {
                *breaks.last_mut().unwrap() = self.breaks[k + 1];
            } else {
                values.push(v);
                breaks.push(self.breaks[k + 1]);
            }
        }
        Density::new(breaks, values).expect("simplification of a valid density")
    }
}

/// Sorted union of two breakpoint lists on `[0, length]` with near-duplicates
/// removed.
pub fn merge_breaks(a: &[f64], b: &[f64], length: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().filter(|&x| x > BREAK_TOL && x < length - BREAK_TOL).collect();
    all.sort_by(f64::total_cmp);
    let mut out = vec![0.0];
    for x in all {
        if x - out.last().unwrap() > BREAK_TOL {
            out.push(x);
        }
    }
    out.push(length);
    out
}

/// Unvalidated density as it appears in instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDensity {
    #[serde(deserialize_with = "crate::num::numbers")]
    pub breakpoints: Vec<f64>,
    #[serde(deserialize_with = "crate::num::numbers")]
    pub values: Vec<f64>,
}

/// Road id -> density.
pub type RawMeasure = BTreeMap<String, RawDensity>;

/// A measure on a road map: one density per road, absent roads carry none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measure {
    densities: BTreeMap<RoadId, Density>,
}

impl Measure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(map: &RoadMap, entries: impl IntoIterator<Item = (RoadId, Density)>) -> Result<Self> {
        let mut densities = BTreeMap::new();
        for (r, d) in entries {
            if r >= map.num_roads() {
                return Err(Error::UnknownRoad(format!("#{r}")));
            }
            let road = map.road(r);
            if (d.length() - road.length).abs() > 1e-9 * road.length.max(1.0) {
                return Err(Error::InvalidDensity(format!(
                    "density on road `{}` spans [0, {}] but the road has length {}",
                    road.id,
                    d.length(),
                    road.length
                )));
            }
            let mut breaks = d.breaks.clone();
            *breaks.last_mut().unwrap() = road.length;
            densities.insert(r, Density::new(breaks, d.values.clone())?);
        }
        Ok(Measure { densities })
    }

    /// Uniform densities with the given total mass on each road.
    pub fn uniform_masses(map: &RoadMap, masses: &[(RoadId, f64)]) -> Result<Self> {
        let mut acc: BTreeMap<RoadId, f64> = BTreeMap::new();
        for &(r, m) in masses {
            if r >= map.num_roads() {
                return Err(Error::UnknownRoad(format!("#{r}")));
            }
            *acc.entry(r).or_default() += m;
        }
        let entries = acc
            .into_iter()
            .map(|(r, m)| {
                let l = map.road(r).length;
                Density::uniform(l, m / l).map(|d| (r, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(map, entries)
    }

    pub fn from_raw(map: &RoadMap, raw: &RawMeasure) -> Result<Self> {
        let entries = raw
            .iter()
            .map(|(name, d)| Ok((map.road_id(name)?, Density::new(d.breakpoints.clone(), d.values.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(map, entries)
    }

    pub fn to_raw(&self, map: &RoadMap) -> RawMeasure {
        self.densities
            .iter()
            .map(|(&r, d)| {
                (map.road(r).id.clone(), RawDensity { breakpoints: d.breaks.clone(), values: d.values.clone() })
            })
            .collect()
    }

    pub fn density(&self, r: RoadId) -> Option<&Density> {
        self.densities.get(&r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RoadId, &Density)> {
        self.densities.iter().map(|(&r, d)| (r, d))
    }

    pub fn road_mass(&self, r: RoadId) -> f64 {
        self.densities.get(&r).map_or(0.0, Density::total)
    }

    pub fn total(&self) -> f64 {
        self.densities.values().map(Density::total).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.densities.values().all(Density::is_zero)
    }

    pub fn scaled(&self, c: f64) -> Measure {
        Measure { densities: self.densities.iter().map(|(&r, d)| (r, d.scaled(c))).collect() }
    }

    pub(crate) fn from_densities(densities: BTreeMap<RoadId, Density>) -> Self {
        Measure { densities }
    }
}

/// Pointwise minimum of two measures.
pub fn pointwise_min(a: &Measure, b: &Measure) -> Measure {
    let densities =
        a.densities.iter().filter_map(|(r, da)| b.densities.get(r).map(|db| (*r, da.min(db).simplified()))).collect();
    Measure { densities }
}

/// Pointwise sum of two measures.
pub fn add(a: &Measure, b: &Measure) -> Measure {
    let mut densities = a.densities.clone();
    for (r, db) in &b.densities {
        let d = match densities.get(r) {
            Some(da) => da.add(db).simplified(),
            None => db.clone(),
        };
        densities.insert(*r, d);
    }
    Measure { densities }
}

/// Pointwise difference `a - b`; fails where `b` exceeds `a`.
pub fn subtract(a: &Measure, b: &Measure) -> Result<Measure> {
    let mut densities = BTreeMap::new();
    for (r, db) in &b.densities {
        if !a.densities.contains_key(r) && db.total() > MASS_TOL {
            return Err(Error::NotDominated { road: format!("#{r}") });
        }
    }
    for (r, da) in &a.densities {
        let d = match b.densities.get(r) {
            Some(db) => da.sub(db).ok_or_else(|| Error::NotDominated { road: format!("#{r}") })?.simplified(),
            None => da.clone(),
        };
        densities.insert(*r, d);
    }
    Ok(Measure { densities })
}
