//! JSON instance files: a road map with optional source and target measures
//! and an optional demand pmf.
//!
//! Numbers may be JSON numbers or strings holding a decimal or a fraction
//! such as `"2/5"`. Unknown fields are rejected.

use serde::{Deserialize, Serialize};

use crate::dpdp::{DemandPmf, RawPmfEntry};
use crate::error::{Error, Result};
use crate::measures::{Measure, RawMeasure};
use crate::roadmap::{validate_roadmap, RawRoad, RawRoadMap, RoadMap};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub vertices: Vec<String>,
    pub roads: Vec<RawRoad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<RawMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<RawMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<RawPmfEntry>>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub map: RoadMap,
    pub source: Option<Measure>,
    pub target: Option<Measure>,
    pub pmf: Option<DemandPmf>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<Instance> {
        let map = validate_roadmap(&RawRoadMap { vertices: self.vertices.clone(), roads: self.roads.clone() })?;
        let measure = |raw: &Option<RawMeasure>| raw.as_ref().map(|m| Measure::from_raw(&map, m)).transpose();
        let source = measure(&self.source)?;
        let target = measure(&self.target)?;
        let pmf = self.pmf.as_ref().map(|p| DemandPmf::from_raw(&map, p)).transpose()?;
        Ok(Instance { map, source, target, pmf })
    }
}

impl Instance {
    pub fn parse(text: &str) -> Result<Self> {
        InstanceFile::parse(text)?.validate()
    }

    pub fn to_file(&self) -> InstanceFile {
        let raw = self.map.to_raw();
        InstanceFile {
            vertices: raw.vertices,
            roads: raw.roads,
            source: self.source.as_ref().map(|m| m.to_raw(&self.map)),
            target: self.target.as_ref().map(|m| m.to_raw(&self.map)),
            pmf: self.pmf.as_ref().map(|p| p.to_raw(&self.map)),
        }
    }

    /// Both measures, or an error naming the missing one.
    pub fn measures(&self) -> Result<(&Measure, &Measure)> {
        match (&self.source, &self.target) {
            (Some(s), Some(t)) => Ok((s, t)),
            (None, _) => Err(Error::Parse("instance has no `source` measure".into())),
            (_, None) => Err(Error::Parse("instance has no `target` measure".into())),
        }
    }

    pub fn demand_pmf(&self) -> Result<&DemandPmf> {
        self.pmf.as_ref().ok_or_else(|| Error::Parse("instance has no `pmf` section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = include_str!("../../../fixtures/square.json");

    #[test]
    fn fixture_parses() {
        let inst = Instance::parse(SQUARE).unwrap();
        assert_eq!(inst.map.num_roads(), 4);
        let (s, t) = inst.measures().unwrap();
        assert!((s.total() - 1.0).abs() < 1e-15 && (t.total() - 1.0).abs() < 1e-15);
        assert_eq!(inst.demand_pmf().unwrap().entries().len(), 3);
    }

    #[test]
    fn round_trip() {
        let file = InstanceFile::parse(SQUARE).unwrap();
        let inst = file.validate().unwrap();
        let again = InstanceFile::parse(&inst.to_file().to_json()).unwrap();
        assert_eq!(again, inst.to_file());
        let again = again.validate().unwrap();
        assert_eq!(again.source, inst.source);
        assert_eq!(again.target, inst.target);
        assert_eq!(again.pmf, inst.pmf);
        assert_eq!(again.map.to_raw(), inst.map.to_raw());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let e = InstanceFile::parse(r#"{"vertices": [], "roads": [], "extra": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Parse(m) if m.contains("extra")));
        let neg = r#"{"vertices": ["a", "b"], "roads": [{"id": "r", "tail": "a", "head": "b", "length": -1}]}"#;
        assert!(matches!(Instance::parse(neg), Err(Error::NonPositiveLength { road, .. }) if road == "r"));
        let pmf = r#"{"vertices": ["a", "b"], "roads": [{"id": "r", "tail": "a", "head": "b", "length": "1/2"}],
                      "pmf": [{"pickup": "r", "delivery": "r", "probability": 0.9}]}"#;
        assert!(matches!(Instance::parse(pmf), Err(Error::InvalidPmf(_))));
    }
}
