use thiserror::Error;

use crate::cocycle::ViolationReport;
use crate::solver::HolonomyReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate cover set identifier `{0}`")]
    DuplicateIdentifier(String),
    #[error("pair or triple references unknown identifier `{0}`")]
    UnknownIdentifierInPair(String),
    #[error("degenerate pair or triple {0:?}: identifiers must be distinct")]
    DegenerateSimplex(Vec<String>),
    #[error("triple ({0}, {1}, {2}) is declared but its pair ({3}, {4}) is not")]
    TriplePairMissing(String, String, String, String, String),

    #[error("coupling has no value for pair ({0}, {1})")]
    MissingPairValue(String, String),
    #[error("coupling has a value for ({0}, {1}) but they are not an intersecting pair")]
    PairNotInNerve(String, String),
    #[error("coupling lists ({0}, {1}) more than once")]
    DuplicatePairValue(String, String),
    #[error("primitive has no value for cover set `{0}`")]
    MissingPrimitiveValue(String),
    #[error("base identifier `{0}` is not a cover set")]
    UnknownBaseIdentifier(String),
    #[error("coupling is not compatible: max residual {}", .0.max_residual)]
    Incompatible(Box<ViolationReport>),
    #[error("no primitive exists: max |holonomy| {}", .0.max_abs_holonomy)]
    Obstructed(Box<HolonomyReport>),

    #[error("invalid region `{0}`: {1}")]
    InvalidRegion(String, String),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("path point at parameter {0} lies in no chart")]
    PathNotCovered(f64),
    #[error("chain construction cannot advance past parameter {0}")]
    NoProgress(f64),
    #[error("consecutive charts ({0}, {1}) do not intersect")]
    NonAdjacentConsecutiveCharts(String, String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("path endpoint at parameter {1} is not inside chart `{0}`")]
    EndpointOutsideChart(String, f64),
    #[error("family of paths is empty or paths do not share endpoints")]
    InvalidPathFamily,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field samples do not match the mask at node ({0}, {1})")]
    FieldMaskMismatch(usize, usize),
    #[error("discrete curl {2:e} at plaquette with lower-left node ({0}, {1}) exceeds tolerance")]
    CurlNotZero(usize, usize, f64),
    #[error("masked nodes of rectangle `{0}` are not 4-connected")]
    DisconnectedRectangle(String),
    #[error("rectangle `{0}` contains no masked nodes")]
    EmptyRectangle(String),
    #[error("f_V - f_U is not constant on the overlap of ({0}, {1}): deviation {2:e}")]
    NotConstantOnOverlap(String, String, f64),
    #[error("declared pair ({0}, {1}) shares no sample nodes")]
    EmptyOverlapSamples(String, String),
    #[error("glued values disagree by {2:e} at node ({0}, {1})")]
    InconsistentGlue(usize, usize, f64),
    #[error("masked node ({0}, {1}) is not covered by any rectangle")]
    NodeNotCovered(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that say something about the data (no primitive,
    /// violated compatibility, failed gluing hypothesis) rather than about
    /// malformed input.
    pub fn is_domain_failure(&self) -> bool {
        matches!(
            self,
            Error::Obstructed(_)
                | Error::Incompatible(_)
                | Error::CurlNotZero(..)
                | Error::NotConstantOnOverlap(..)
                | Error::InconsistentGlue(..)
                | Error::PathNotCovered(_)
                | Error::NoProgress(_)
                | Error::NonAdjacentConsecutiveCharts(..)
                | Error::DisconnectedRectangle(_)
        )
    }
}
