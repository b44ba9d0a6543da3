use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("road map has no vertices")]
    EmptyMap,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate road id `{0}`")]
    DuplicateRoad(String),
    #[error("road `{road}` has non-positive length {length}")]
    NonPositiveLength { road: String, length: f64 },
    #[error("road `{road}` references unknown vertex `{vertex}`")]
    UnknownVertex { road: String, vertex: String },
    #[error("road network is disconnected (vertex `{0}` unreachable)")]
    Disconnected(String),
    #[error("unknown road `{0}`")]
    UnknownRoad(String),
    #[error("coordinate {coord} outside road `{road}` of length {length}")]
    CoordOutOfRange { road: String, coord: f64, length: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("mass {mass} outside [0, {total}]")]
    MassOutOfRange { mass: f64, total: f64 },
    #[error("cannot subtract: second measure exceeds the first on road `{road}`")]
    NotDominated { road: String },
    #[error("measures overlap pointwise on road `{road}`")]
    OverlappingSupport { road: String },
    #[error("road `{road}` carries positive mass of both measures")]
    MixedRoad { road: String },
    #[error("total masses differ: source {source_mass}, target {target_mass}")]
    UnequalMass { source_mass: f64, target_mass: f64 },

    #[error("supplies do not balance (net {0})")]
    Unbalanced(f64),
    #[error("flow vector has {got} entries, network has {expected} edges")]
    FlowLength { expected: usize, got: usize },
    #[error("edge {edge} has negative weight {weight}")]
    NegativeWeight { edge: usize, weight: f64 },
    #[error("flow {flow} on edge {edge} lies outside the cost domain [0, {max}]")]
    OutsideDomain { edge: usize, flow: f64, max: f64 },
    #[error("infeasible flow problem: {0}")]
    Infeasible(String),
    #[error("flow is not admissible (max conservation violation {0})")]
    Inadmissible(f64),
    #[error("solver stopped after {iterations} iterations with gap {gap} (objective {value})")]
    NotConverged { gap: f64, iterations: usize, value: f64 },

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("device of road `{0}` is not parted by the optimal flow")]
    Unparted(String),

    #[error("invalid demand pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("monte carlo needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
